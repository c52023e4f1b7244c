"""Command-line front end: ``bench``, ``analyze``, ``simulate`` and ``verify-vectors``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import analysis, gf, mac, simnet, vectors
from .locating import LocatingParams
from .mac import Dimensions, MacKey
from .topology import Topology, TopologyError

SCHEMA_VERSION = 1

DEFAULTS = {
    "n": 1024, "m": 32, "l": 1, "w": 4, "ell": 9,
    "lam": 19, "delta": 9, "theta": 3,
    "node_count": 50, "etas": [4, 8, 12, 16, 20], "rounds": 100,
    "liar_fraction": 0.5, "control_delay": [10.0, 100.0], "window_ms": None,
    "tau": 3, "cooldown": 10,
}


class UsageError(Exception):
    pass


# -- output


def emit(records: list[dict], fmt: str, out, table: str | None = None) -> None:
    if fmt == "jsonl":
        for r in records:
            rec = {"schema_version": SCHEMA_VERSION, **({"table": table} if table else {}), **r}
            out.write(json.dumps(rec, sort_keys=False, default=_plain) + "\n")
        return
    if not records:
        return
    if table:
        out.write(f"# {table}\n")
    w = csv.DictWriter(out, fieldnames=list(records[0]), lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: _cell(v) for k, v in r.items()})


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _plain(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    raise TypeError(type(x).__name__)


class _Output:
    def __init__(self, path):
        self.path = path
        self.buf = io.StringIO()

    def __enter__(self):
        return self.buf

    def __exit__(self, exc_type, *_):
        if exc_type is not None:
            return False
        if self.path in (None, "-"):
            sys.stdout.write(self.buf.getvalue())
        else:
            Path(self.path).parent.mkdir(parents=True, exist_ok=True)
            Path(self.path).write_text(self.buf.getvalue())
        return False


# -- configuration


def load_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            data = yaml.safe_load(Path(args.config).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a mapping")
        for section in ("dims", "locating"):
            cfg.update(data.pop(section, None) or {})
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        if "eta" in data:
            data["etas"] = data.pop("eta")
        unknown = set(data) - set(DEFAULTS) - {"seed", "topology", "attackers"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
        if "lambda" in cfg:
            cfg["lam"] = cfg.pop("lambda")
    for k in ("n", "m", "l", "lam", "delta", "theta", "rounds", "node_count", "w", "ell"):
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if getattr(args, "etas", None):
        cfg["etas"] = args.etas
    return cfg


def scheme_params(cfg) -> analysis.SchemeParams:
    try:
        return analysis.SchemeParams(n=cfg["n"], m=cfg["m"], w=cfg["w"], l=cfg["l"], lam=cfg["lam"],
                                     delta=cfg["delta"], theta=cfg["theta"], ell=cfg["ell"])
    except ValueError as exc:
        raise UsageError(f"invalid parameters: {exc}") from exc


def sim_config(cfg, trace: bool) -> simnet.SimConfig:
    try:
        return simnet.SimConfig(
            dims=Dimensions(cfg["n"], cfg["m"], cfg["l"]),
            params=LocatingParams(cfg["lam"], cfg["delta"], cfg["theta"]),
            control_delay=tuple(cfg["control_delay"]),
            window_ms=cfg["window_ms"],
            tau=cfg["tau"],
            cooldown=cfg["cooldown"],
            trace=trace,
        )
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid parameters: {exc}") from exc


# -- subcommands


def _time(fn, runs: int) -> float:
    t = time.perf_counter()
    for _ in range(runs):
        fn()
    return (time.perf_counter() - t) / runs * 1e6


def cmd_bench(args) -> int:
    """Mean time per call of mac, combine and verify; local hardware, not comparable across machines."""
    cfg = load_config(args)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    runs = args.runs
    records = []
    for l in args.tags:
        dims = Dimensions(cfg["n"], cfg["m"], l)
        key = MacKey.generate(rng)
        sid = mac.space_id(int(rng.integers(0, 2**63)))
        y = gf.random_vector(rng, dims.length)
        t = mac.mac(key, sid, y, dims)
        tags = [bytes(gf.random_vector(rng, l)) for _ in range(cfg["w"])]
        alphas = [int(a) for a in gf.random_vector(rng, cfg["w"])]

        def mac_full():
            # key material is rebuilt each call so the PRF/PRG cost is included
            gf.matvec(mac.key_matrix_uncached(key, sid, dims), y)

        def verify_full():
            np.array_equal(gf.matvec(mac.key_matrix_uncached(key, sid, dims), y), t)

        timings = {
            "mac": _time(mac_full, runs),
            "combine": _time(lambda: gf.combine_scalar(alphas, tags), runs),
            "verify": _time(verify_full, runs),
            "mac_cached": _time(lambda: mac.mac(key, sid, y, dims), runs),
        }
        for op, us in timings.items():
            records.append({"tags": l, "op": op, "mean_us": round(us, 3), "runs": runs,
                            "security_log2": -8 * l})
    with _Output(args.out) as out:
        emit(records, args.format, out, "bench")
    print("note: timings are local-hardware measurements", file=sys.stderr)
    return 0


def _parse_row(text: str) -> tuple[int, int, int]:
    try:
        lam, delta, theta = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lambda,delta,theta, got {text!r}") from None
    return lam, delta, theta


def cmd_analyze(args) -> int:
    cfg = load_config(args)
    base = scheme_params(cfg)
    rows = [r[0] for r in analysis.PUBLISHED_BOUNDS] + list(args.row or [])
    for lam, delta, theta in rows:
        try:
            base.with_(lam=lam, delta=delta, theta=theta)
        except ValueError as exc:
            raise UsageError(f"invalid row {lam},{delta},{theta}: {exc}") from exc
    with _Output(args.out) as out:
        if args.table in ("1", "all"):
            emit(analysis.table_i(base, rows), args.format, out, "table_i")
        if args.table in ("2", "all"):
            emit(analysis.table_ii(base), args.format, out, "table_ii")
        if args.table in ("3", "all"):
            emit(analysis.table_iii(base), args.format, out, "table_iii")
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    sc = sim_config(cfg, args.trace)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    trace_dir = None
    if args.trace:
        trace_dir = Path(args.out).with_suffix(".traces") if args.out not in (None, "-") else Path("traces")
    topo_path = args.topology or cfg.get("topology")
    if topo_path:
        try:
            topo = Topology.load(topo_path)
        except (OSError, TopologyError) as exc:
            raise UsageError(f"cannot load topology {topo_path}: {exc}") from exc
        specs = []
        for a in cfg.get("attackers") or []:
            if isinstance(a, str):
                specs.append(simnet.AttackerSpec(a, frozenset({"pollute_all_outgoing"})))
            else:
                specs.append(simnet.AttackerSpec(str(a["node"]), frozenset(a.get("behaviors", ["pollute_all_outgoing"]))))
        try:
            net = simnet.Network(topo, specs, sc, seed=seed)
        except TopologyError as exc:
            raise UsageError(str(exc)) from exc
        res = net.eliminate_all()
        records = [{"attackers": " ".join(res.attackers), "generations": res.generations_used,
                    "delay_ms": res.sim_time_ms, "order": " ".join(res.order),
                    "degenerate": res.degenerate}]
        if trace_dir is not None:
            simnet.write_events(trace_dir / "run.jsonl", res.events)
    else:
        try:
            rows = simnet.run_experiment(cfg["node_count"], cfg["etas"], cfg["rounds"], seed, sc,
                                         trace_dir=trace_dir, liar_fraction=cfg["liar_fraction"])
        except TopologyError as exc:
            raise UsageError(str(exc)) from exc
        records = [simnet.row_dict(r) for r in rows]
    with _Output(args.out) as out:
        emit(records, args.format, out)
    return 0


def cmd_verify_vectors(args) -> int:
    path = Path(args.path) if args.path else vectors.default_path()
    try:
        vs = vectors.parse(path.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    if not vs:
        print(f"warning: {path} holds no vectors", file=sys.stderr)
    bad = vectors.check(vs)
    records = [{"line": v.line, "status": "mismatch"} for v in bad]
    with _Output(args.out) as out:
        emit(records, args.format, out)
    print(f"{len(vs) - len(bad)}/{len(vs)} vectors pass", file=sys.stderr)
    return 1 if bad else 0


# -- parser


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=d, help="master seed (default 0, or the config file's seed)")
    parser.add_argument("--format", choices=("csv", "jsonl"), default=d if suppress else "csv")
    parser.add_argument("--out", default=d, help="output file (default: stdout)")
    parser.add_argument("--config", default=d, help="YAML configuration file")
    parser.add_argument("--trace", action="store_true", default=d if suppress else False,
                        help="write per-run event logs")


def _params(parser: argparse.ArgumentParser) -> None:
    for name in ("n", "m", "l", "w", "ell", "lam", "delta", "theta"):
        flag = "--lambda" if name == "lam" else f"--{name}"
        parser.add_argument(flag, dest=name, type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spacemac", description=__doc__)
    _common(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="time mac/combine/verify")
    _common(b, suppress=True)
    _params(b)
    b.add_argument("--runs", type=int, default=100_000)
    b.add_argument("--tags", type=int, nargs="+", default=[1, 4])
    b.set_defaults(func=cmd_bench)

    a = sub.add_parser("analyze", help="security bounds and overhead tables")
    _common(a, suppress=True)
    _params(a)
    a.add_argument("--table", choices=("1", "2", "3", "all"), default="all")
    a.add_argument("--row", type=_parse_row, action="append", help="extra lambda,delta,theta row")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="attacker-elimination experiment")
    _common(s, suppress=True)
    _params(s)
    s.add_argument("--rounds", type=int, default=None)
    s.add_argument("--node-count", dest="node_count", type=int, default=None)
    s.add_argument("--eta", dest="etas", type=int, nargs="+", default=None)
    s.add_argument("--topology", default=None, help="YAML topology file instead of random networks")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify-vectors", help="recompute tags in a test-vector file")
    _common(v, suppress=True)
    v.add_argument("path", nargs="?", default=None)
    v.set_defaults(func=cmd_verify_vectors)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except vectors.VectorParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
