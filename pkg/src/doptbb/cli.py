"""Command-line front end: ``doptbb {gen,solve,ls,bench-det,bounds}``.

Reports are CSV on stdout (or ``--out``), one row per instance x configuration;
``--format json`` writes the same rows as a JSON list. Generated instances go
to ``$DOPTBB_OUTDIR`` unless an explicit path is given.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import bench
from .bnb import VERSIONS, Infeasible, SolverConfig, root_incumbent, solve
from .bounds import node_bounds
from .detengine import Strategy
from .heuristics import SEEDS, Mode, build_seed, local_search
from .instance import InstanceError, generate_random, load, save
from .relaxation import DEFAULT_MAX_ITERS, DEFAULT_TOL, recover_dual, solve_relaxation

OUTDIR_ENV = "DOPTBB_OUTDIR"
log = logging.getLogger("doptbb")


def parse_int_list(text: str, step: int = 50) -> list[int]:
    """``"20,40"``, ``"100..250"`` (step 50) or ``"100..250:25"``; ranges are inclusive."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            span, _, st = part.partition(":")
            lo, hi = (int(v) for v in span.split(".."))
            inc = int(st) if st else step
            if inc <= 0 or hi < lo:
                raise argparse.ArgumentTypeError(f"bad range {part!r}")
            out.extend(range(lo, hi + 1, inc))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def parse_versions(text: str) -> list[int]:
    """``"6"``, ``"1,3,6"`` or ``"1-7"``."""
    out = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = (int(v) for v in part.split("-"))
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    bad = [v for v in out if v not in VERSIONS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown version(s) {bad}; choose from 1-7")
    return out


def _ms(t: float) -> float:
    return round(t, 3)


def _fmt(v: float) -> float:
    return round(float(v), 6)


def write_rows(rows: list[dict], fmt: str, out) -> None:
    if fmt == "json":
        json.dump(rows, out, indent=2)
        out.write("\n")
        return
    if not rows:
        return
    w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)


def _emit(rows, args):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_rows(rows, args.format, fh)
    else:
        write_rows(rows, args.format, sys.stdout)


def _load(path):
    try:
        return load(path)
    except (OSError, InstanceError) as exc:
        raise SystemExit(f"error: {path}: {exc}")


def cmd_gen(args) -> int:
    inst = generate_random(args.n, seed=args.seed, density=args.density, u_max=args.u_max,
                           m=args.m, s=args.s)
    path = args.out
    if path is None:
        outdir = Path(os.environ.get(OUTDIR_ENV, "."))
        outdir.mkdir(parents=True, exist_ok=True)
        path = outdir / f"inst_n{inst.n}_m{inst.m}_s{inst.s}_seed{args.seed}.txt"
    save(inst, path)
    print(path)
    return 0


def _config(args, version=None) -> SolverConfig:
    kw = dict(
        integrality_tol=args.int_tol, gap_tol=args.gap_tol, node_limit=args.node_limit,
        time_limit=args.time_limit, threads=args.threads, strategy=args.strategy,
        ls_mode=args.ls_mode, relax_tol=args.relax_tol, relax_iters=args.relax_iters,
    )
    if version is not None:
        return SolverConfig.from_version(version, **kw)
    return SolverConfig(vbt=args.vbt, lsi=args.lsi, lsc=args.lsc, hs=args.hs, **kw)


def cmd_solve(args) -> int:
    if args.versions:
        versions = args.versions
    elif args.version is not None:
        versions = [args.version]
    else:
        versions = [None]
    rows = []
    for path in args.instances:
        inst = _load(path)
        base = {"instance": Path(path).stem, "n": inst.n, "m": inst.m, "s": inst.s}
        ls_cols = {}
        if args.with_ls:
            t0 = time.perf_counter()
            _, ls_z = root_incumbent(inst, SolverConfig(strategy=args.strategy))
            ls_cols = {"ls_z": _fmt(ls_z), "ls_seconds": _ms(time.perf_counter() - t0)}
        for v in versions:
            cfg = _config(args, v)
            label = str(v) if v is not None else "custom"
            try:
                res = solve(inst, cfg)
            except Infeasible as exc:
                log.warning("%s version %s: %s", path, label, exc)
                rows.append({**base, "version": label, "status": "infeasible"})
                continue
            rows.append({
                **base,
                "version": label,
                "status": res.status,
                "best_z": _fmt(res.best_z),
                "nodes": res.node_count,
                "seconds": _ms(res.wall_time),
                **ls_cols,
                "root_relax": _fmt(res.root_relax_value),
                "root_ub": _fmt(res.root_ub),
                "hadamard": _fmt(res.root_hadamard),
                "spectral": _fmt(res.root_spectral),
                "vbt_effective": res.vbt_effective,
                "vars_fixed": res.vars_fixed,
            })
    _emit(rows, args)
    return 0


def cmd_ls(args) -> int:
    rows = []
    for path in args.instances:
        inst = _load(path)
        for sd in args.seeds:
            x0 = build_seed(inst, sd)
            for md in args.modes:
                res = local_search(inst, x0, md, args.strategy)
                rows.append({
                    "instance": Path(path).stem, "n": inst.n, "m": inst.m, "s": inst.s,
                    "seed": sd, "mode": md, "ldet": _fmt(res.ldet), "moves": res.moves,
                    "evaluations": res.evaluations, "seconds": _ms(res.seconds),
                })
    _emit(rows, args)
    return 0


def cmd_bench_det(args) -> int:
    ms = args.m if args.m is not None else [None]
    ss = args.s if args.s is not None else [None]
    result = bench.run(args.n, ms, ss, args.strategies, args.modes, args.seeds, args.reps)
    rows = []
    for r in result:
        d = r.as_dict()
        # per-swap times are microseconds; keep significant digits
        d["seconds"] = float(f"{d['seconds']:.6g}")
        rows.append(d)
    _emit(rows, args)
    return 0


def cmd_bounds(args) -> int:
    rows = []
    for path in args.instances:
        inst = _load(path)
        rep = node_bounds(inst)
        rel = solve_relaxation(inst, tol=args.relax_tol, max_iters=args.relax_iters)
        dual = recover_dual(inst, rel.xC)
        rows.append({
            "instance": Path(path).stem, "n": inst.n, "m": inst.m, "s": inst.s,
            "hadamard": _fmt(rep.hadamard), "spectral": _fmt(rep.spectral),
            "relax": _fmt(rel.z_primal), "zeta_hat": _fmt(dual.zeta_hat),
            "relax_iterations": rel.iterations,
        })
    _emit(rows, args)
    return 0


def _csv_list(choices):
    def parse(text):
        items = [t.strip() for t in text.split(",") if t.strip()]
        bad = [t for t in items if t not in choices]
        if bad or not items:
            raise argparse.ArgumentTypeError(f"choose from {','.join(choices)}")
        return items
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="doptbb", description="Integer D-optimal design toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def output_opts(sp):
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("-o", "--out", help="write the report here instead of stdout")

    strategies = [s.value for s in Strategy]
    modes = [m.value for m in Mode]

    g = sub.add_parser("gen", help="generate a random instance file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--density", type=float, default=0.5)
    g.add_argument("--u-max", type=int, default=3)
    g.add_argument("--m", type=int, help="default floor(n/4)")
    g.add_argument("--s", type=int, help="default floor(n/2)")
    g.add_argument("-o", "--out", help=f"file path (default: ${OUTDIR_ENV} or cwd)")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="branch-and-bound")
    s.add_argument("instances", nargs="+")
    grp = s.add_mutually_exclusive_group()
    grp.add_argument("--version", type=int, choices=sorted(VERSIONS))
    grp.add_argument("--versions", type=parse_versions, help='e.g. "1-7" or "1,6"')
    for flag in ("vbt", "lsi", "lsc", "hs"):
        s.add_argument(f"--{flag}", action="store_true")
    s.add_argument("--gap-tol", type=float, default=1e-6)
    s.add_argument("--int-tol", type=float, default=1e-5)
    s.add_argument("--node-limit", type=int)
    s.add_argument("--time-limit", type=float)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--strategy", choices=strategies, default="sm")
    s.add_argument("--ls-mode", choices=modes + ["all"], default="fi")
    s.add_argument("--relax-tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--relax-iters", type=int, default=DEFAULT_MAX_ITERS)
    s.add_argument("--with-ls", action="store_true", help="also report the root local search")
    output_opts(s)
    s.set_defaults(func=cmd_solve)

    ls = sub.add_parser("ls", help="local search from every seed x mode")
    ls.add_argument("instances", nargs="+")
    ls.add_argument("--seeds", type=_csv_list(list(SEEDS) + ["relax"]), default=list(SEEDS))
    ls.add_argument("--modes", type=_csv_list(modes), default=modes)
    ls.add_argument("--strategy", choices=strategies, default="sm")
    output_opts(ls)
    ls.set_defaults(func=cmd_ls)

    b = sub.add_parser("bench-det", help="time the swap engines")
    b.add_argument("--n", type=parse_int_list, required=True)
    b.add_argument("--m", type=parse_int_list, help="default floor(n/4)")
    b.add_argument("--s", type=parse_int_list, help="default floor(n/2)")
    b.add_argument("--strategies", type=_csv_list(strategies), default=strategies)
    b.add_argument("--modes", type=_csv_list(["swap"] + modes), default=["swap"])
    b.add_argument("--seeds", type=parse_int_list, default=[0])
    b.add_argument("--reps", type=int, default=3)
    output_opts(b)
    b.set_defaults(func=cmd_bench_det)

    bd = sub.add_parser("bounds", help="Hadamard, spectral and relaxation bounds")
    bd.add_argument("instances", nargs="+")
    bd.add_argument("--relax-tol", type=float, default=DEFAULT_TOL)
    bd.add_argument("--relax-iters", type=int, default=DEFAULT_MAX_ITERS)
    output_opts(bd)
    bd.set_defaults(func=cmd_bounds)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InstanceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
