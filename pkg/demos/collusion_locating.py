"""Three colluding attackers; A lies about what it received from its malicious parent B.

Run: python3 demos/collusion_locating.py
"""
from spacemac.mac import Dimensions
from spacemac.simnet import Network, SimConfig, collusion_example

topo, attackers = collusion_example()
for a in attackers:
    print(f"attacker {a.node}: {sorted(a.behaviors)}")

net = Network(topo, attackers, SimConfig(dims=Dimensions(64, 4, 1)), seed=0)
res = net.eliminate_all()

print()
for generation, named in res.blacklist_trace:
    print(f"generation {generation}: blacklisted {named}")
print(f"all attackers gone after {res.generations_used} generations, {res.sim_time_ms:.0f} ms of virtual time")
print(f"false accusations: {res.false_accusations or 'none'}")
