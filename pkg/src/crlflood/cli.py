"""Command-line front end.

Exit codes: 0 success, 1 bad configuration or usage, 2 failure while running.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, kernels
from .config import ConfigError, describe_defaults, load_config, parse_config_text
from .engine import RunConfig, _sample_slots, run, sweep
from .schemes import Scheme
from .security import hash_overhead, hash_packet_count, signed_packet_count

CSV_SCHEMAS = """\
CSV files (all with a header row):
  series.csv   slot,seconds,fraction_decoded
  nodes.csv    node,decoded_slot,useful_tx,wasted_tx
  line.csv     hop,T_n_slots,H_next_fraction           (line topology only)
  compare.csv  slot,seconds,<one column per scheme>
  fluid        t,h_1..h_n
  fixedpoint   i,h0_i after a '# T=... h_inf=... M=...' comment line

CRLFLOOD_SEED overrides the config seed; --seed overrides both."""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for run failures here
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _rate(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _int_range(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    try:
        if not sep:
            return [int(v) for v in text.split(",")]
        return list(range(int(lo), int(hi) + 1))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N, N,M,... or A..B, got {text!r}") from None


def _fmt_rate(M: float) -> str:
    return "inf" if math.isinf(M) else f"{M:g}"


def _load(args) -> RunConfig:
    if args.config is None:
        cfg = parse_config_text("", args.set)
    else:
        cfg = load_config(args.config, args.set)
    env = os.environ.get("CRLFLOOD_SEED")
    if env is not None:
        try:
            cfg = replace(cfg, seed=int(env))
        except ValueError:
            raise ConfigError(f"CRLFLOOD_SEED must be an integer, got {env!r}") from None
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {str(out)!r}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {str(out)!r} is not writable")
    return out


def _overhead_lines(cfg: RunConfig) -> list[str]:
    lines = []
    if not cfg.file.rateless:
        per, count = hash_packet_count(cfg.file, cfg.overhead)
        lines.append(f"hash info: {per} hashes/packet, {count} packets, "
                     f"overhead {hash_overhead(cfg.file, cfg.overhead):.0%}")
    lines.append(f"sign-every-packet file size: {signed_packet_count(cfg.file, cfg.overhead)} packets")
    return lines


def _describe(cfg: RunConfig) -> list[str]:
    t = cfg.topology
    where = (f"line d={t.d}" if t.kind == "line"
             else f"grid {t.rows}x{t.cols} block {t.block_m:g} m, {t.vehicles} vehicles")
    return [f"scheme {cfg.scheme.scheme.value}, M={_fmt_rate(cfg.file.M)}, k={cfg.file.k}, "
            f"eps={cfg.radio.erasure_prob:g}, {where}, seed {cfg.seed}"] + _overhead_lines(cfg)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    for line in _describe(cfg):
        print(line)
    if args.dry_run:
        return 0
    out = _outdir(args.out)
    m = run(cfg)
    m.write_series_csv(out / "series.csv", every=args.every)
    m.write_nodes_csv(out / "nodes.csv")
    if cfg.topology.kind == "line":
        m.write_line_csv(out / "line.csv")
    print(f"slots run: {m.slots}, honest decoded: {m.final_fraction():.3f}, "
          f"median decode slot: {m.median_decode_slot():g}")
    return 0


def cmd_compare(args) -> int:
    base = _load(args)
    out = _outdir(args.out)
    schemes = [Scheme.parse(s) for s in args.schemes] if args.schemes else list(Scheme)
    # one seed for all schemes: same placement, paths and adversary choice
    configs = [replace(base, scheme=replace(base.scheme, scheme=s)) for s in schemes]
    results = sweep(configs, workers=args.workers)
    series = [r.runs[0].fraction_decoded for r in results]
    length = max(len(s) for s in series)
    padded = [np.concatenate([s, np.full(length - len(s), s[-1] if len(s) else 0.0)])
              for s in series]
    path = out / "compare.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "seconds"] + [s.value for s in schemes])
        for slot in _sample_slots(length, args.every):
            w.writerow([slot, repr(slot * base.radio.slot_seconds)]
                       + [repr(float(p[slot - 1])) for p in padded])
    for s, r in zip(schemes, results):
        m = r.runs[0]
        print(f"{s.value:18s} median decode slot {m.median_decode_slot():>8g}  "
              f"decoded {m.final_fraction():.3f}")
    print(f"wrote {path}")
    return 0


def cmd_fluid(args) -> int:
    if args.proportional:
        traj = analysis.proportional_fluid_integrate(args.nodes, args.t_end, args.dt,
                                                     max_rounds=args.rounds,
                                                     record_every=args.record_every)
    else:
        traj = analysis.fluid_integrate(args.M, args.nodes, args.t_end, args.dt,
                                        max_rounds=args.rounds,
                                        record_every=args.record_every)
    if args.out:
        traj.write_csv(args.out)
    rounds = traj.round_times()
    print(f"rounds completed: {len(rounds)}")
    if len(rounds):
        print(f"last round time: {float(rounds[-1])!r}")
    return 0


def cmd_fixedpoint(args) -> int:
    T, h_inf = analysis.solve_TF(args.M)
    print(f"T^F({_fmt_rate(args.M)}) = {T!r}")
    print(f"h_inf = {h_inf!r}")
    if args.out:
        analysis.fixed_point_profile(args.M, T, depth=args.depth).write_csv(args.out)
    return 0


def cmd_bounds(args) -> int:
    Ms = args.M or [3.0]
    print("n," + ",".join(f"bound_M{_fmt_rate(M)}" for M in Ms))
    for n in args.n:
        print(f"{n}," + ",".join(f"{analysis.theorem1_bound(n, M):.5f}" for M in Ms))
    print("one-hop limit of T_1/k at eps=" + f"{args.eps:g}: "
          + ", ".join(f"M={_fmt_rate(M)} {analysis.one_hop_asymptote(M, args.eps):.5f}" for M in Ms))
    return 0


def cmd_validate(args) -> int:
    print(f"kernel backend: {kernels.BACKEND}")
    for M in args.M:
        dev = analysis.discrete_vs_fluid(M, args.eps, args.k, args.nodes, rng=args.seed)
        print(f"M={_fmt_rate(M)} k={args.k} nodes={args.nodes}: max deviation {dev:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    epilog = "Config keys and defaults:\n" + describe_defaults() + "\n\n" + CSV_SCHEMAS
    p = _Parser(prog="crlflood", description="Simulate and analyse pollution-resistant "
                "coded content flooding between vehicles.",
                epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_args(sp):
        sp.add_argument("--config", help="INI config file (default: built-in scenario)")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config key; repeatable")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--every", type=int, default=1, help="write every N-th slot")

    sp = sub.add_parser("simulate", help="one run, metrics CSVs")
    run_args(sp)
    sp.add_argument("--dry-run", action="store_true", help="print the resolved setup only")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="all schemes on one seed, fraction decoded over time")
    run_args(sp)
    sp.add_argument("--schemes", nargs="+", help="subset of: " + ", ".join(s.value for s in Scheme))
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("fluid", help="integrate the fluid chain")
    sp.add_argument("--M", type=_rate, default=3.0)
    sp.add_argument("--nodes", type=int, default=20)
    sp.add_argument("--t-end", type=float, default=20.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--rounds", type=int)
    sp.add_argument("--record-every", type=int, default=100)
    sp.add_argument("--proportional", action="store_true", help="proportional forwarding")
    sp.add_argument("--out", help="trajectory CSV path")
    sp.set_defaults(func=cmd_fluid)

    sp = sub.add_parser("fixedpoint", help="per-hop delay limit and fixed-point profile")
    sp.add_argument("--M", type=_rate, default=3.0)
    sp.add_argument("--depth", type=int, default=64)
    sp.add_argument("--out", help="profile CSV path")
    sp.set_defaults(func=cmd_fixedpoint)

    sp = sub.add_parser("bounds", help="closed-form delay bounds")
    sp.add_argument("--n", type=_int_range, default=list(range(1, 6)), help="e.g. 1..5 or 1,2,10")
    sp.add_argument("--M", type=_rate, action="append")
    sp.add_argument("--eps", type=float, default=0.0)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("validate", help="discrete chain against the fluid limit")
    sp.add_argument("--M", type=_rate, action="append", default=None)
    sp.add_argument("--k", type=int, default=10_000)
    sp.add_argument("--nodes", type=int, default=5)
    sp.add_argument("--eps", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "validate" and args.M is None:
            args.M = [3.0]
        if getattr(args, "every", 1) < 1:
            raise _UsageError("--every must be >= 1")
        return args.func(args)
    except (_UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
