"""Locating security bounds and per-packet overheads at the headline parameters.

Run: python3 demos/bounds_and_overheads.py
"""
import numpy as np

from spacemac import analysis, locating

base = analysis.SchemeParams()

print("lambda delta theta   log2 Pr[sabotage]   log2 Pr[forgery]   bytes")
for row in analysis.table_i(base):
    print(f"{row['lambda']:>6} {row['delta']:>5} {row['theta']:>5}   "
          f"{row['log2_pr_p']:>17.2f}   {row['log2_pr_n']:>16.2f}   {row['space_overhead_bytes']:>5}")

print()
for row in analysis.table_iii(base):
    flag = "  (differs from the published count)" if row["discrepancy"] else ""
    print(f"{row['scheme']:>14}: {analysis.comm_overhead(row['scheme'], base):>4} bits, "
          f"{row['multiplications']:>6} multiplications{flag}")

# the closed forms against a quick simulation of the two games
rng = np.random.default_rng(0)
params = locating.LocatingParams()
x = analysis.sabotage_argmax(base)
print()
print(f"sabotage: bound {float(analysis.sabotage_bound_exact(base)):.2e}, "
      f"simulated {locating.parent_sabotage_rate(params, x, 200_000, rng):.2e}")
print(f"forgery:  bound {float(analysis.forgery_bound_exact(base)):.2e}, "
      f"simulated {locating.child_forgery_rate(params, 200_000, rng):.2e}")
