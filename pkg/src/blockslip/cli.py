"""Command-line front end.

    blockslip run CONFIG.json [--out DIR]
    blockslip gradcheck CONFIG.json [--samples N]
    blockslip subsolve INSTANCE.json [--solver NAME]
    blockslip bench {oned,twod} [--n N] [--out DIR]

Log verbosity is read from ``BLOCKSLIP_LOG`` (DEBUG, INFO, WARNING, ...).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import bench, config
from .control import write_field_csv, write_pgm
from .exceptions import ContractViolation, CoverError, InvalidArgument, PatchTooLarge, SolverFailure
from .models import ConvectionDiffusionModel, gradient_check, write_nodal_csv
from .slip import run
from .trsub import load_subproblem, solve, step_to_dict

GRADCHECK_TOL = 1e-6

_log = logging.getLogger("blockslip")


def _setup_logging():
    level = os.environ.get("BLOCKSLIP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def cmd_run(args) -> int:
    cfg = config.load_config(args.config)
    out = Path(args.out or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = config.build_grid_from(cfg)
    vs = config.value_set(cfg)
    alpha = config.alpha(cfg)
    patches = config.build_patches(cfg, grid)
    model = config.build_model(cfg, grid)
    w0 = config.initial_field(cfg, grid, vs)
    scfg = config.slip_config(cfg)
    o = cfg.output

    if o.patches_json:
        patches.dump_json(out / "patches.json")
    if grid.dim == 2 and o.pgm:
        write_pgm(out / "w0.pgm", w0)

    log = open(out / o.log, "w") if o.log else None
    try:
        res = run(model, patches, alpha, vs, scfg, w0, log=log)
    finally:
        if log is not None:
            log.close()

    row = bench.BenchRow(grid.n_cells, len(patches), alpha, res)
    if o.summary:
        (out / o.summary).write_text(bench.summary_csv([row.as_tuple()]))
    if o.result:
        (out / o.result).write_text(json.dumps(res.to_dict()))
    if o.field_csv:
        write_field_csv(out / "final.csv", res.final)
    if grid.dim == 2 and o.pgm:
        write_pgm(out / "final.pgm", res.final)
    if o.state_csv and isinstance(model, ConvectionDiffusionModel):
        write_nodal_csv(out / "u.csv", model.state(res.final))
        write_nodal_csv(out / "u_d.csv", model.target_state())
    print(f"{res.reason}: J={res.J!r} F={res.F!r} TV={res.TV!r} outer={len(res.records)} "
          f"subproblems={res.n_subproblems}")
    return 0


def cmd_gradcheck(args) -> int:
    cfg = config.load_config(args.config)
    model = config.build_model(cfg)
    err = gradient_check(model, config.value_set(cfg), n_samples=args.samples, eps=args.eps, seed=args.seed)
    ok = err <= GRADCHECK_TOL
    print(f"max relative error {err:.3e} ({'ok' if ok else 'FAILED'}, tolerance {GRADCHECK_TOL:g})")
    return 0 if ok else 1


def cmd_subsolve(args) -> int:
    sub = load_subproblem(args.instance)
    step = solve(sub, args.solver, args.dfs_cap)
    print(json.dumps(step_to_dict(step)))
    return 0


def cmd_bench(args) -> int:
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    print(",".join(bench.SUMMARY_HEADER), flush=True)

    def emit(row):
        print(bench.summary_csv([row.as_tuple()]).splitlines()[1], flush=True)

    rows = bench.run_suite(args.suite, args.n, workers=args.workers, on_row=emit)
    if out is not None:
        (out / f"bench_{args.suite}.csv").write_text(bench.summary_csv([r.as_tuple() for r in rows]))
        for r in rows:
            if r.result.final.grid.dim == 2:
                write_pgm(out / f"final_np{r.n_patches}_alpha{r.alpha:g}.pgm", r.result.final)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blockslip", description="Trust-region patch solver for TV-regularized integer control problems.")
    sp = p.add_subparsers(dest="command", required=True)

    r = sp.add_parser("run", help="solve the problem described by a JSON config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides output.dir)")
    r.set_defaults(func=cmd_run)

    g = sp.add_parser("gradcheck", help="finite-difference test of the model gradient")
    g.add_argument("config")
    g.add_argument("--samples", type=int, default=10)
    g.add_argument("--eps", type=float, default=1e-5)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gradcheck)

    s = sp.add_parser("subsolve", help="solve one serialized trust-region subproblem")
    s.add_argument("instance")
    s.add_argument("--solver", default="exact", choices=["exact", "auto", "dp", "dfs", "milp", "bruteforce"],
                   help="'exact' (default) never falls back to the MILP; 'auto' does for large 2D patches")
    s.add_argument("--dfs-cap", type=int, default=25)
    s.set_defaults(func=cmd_subsolve)

    b = sp.add_parser("bench", help="sweep alpha and patch counts on a benchmark")
    b.add_argument("suite", choices=["oned", "twod"])
    b.add_argument("--n", type=int, default=None, help="cells per axis")
    b.add_argument("--out", default=None)
    b.add_argument("--workers", type=int, default=1)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidArgument, CoverError, PatchTooLarge, SolverFailure, ContractViolation, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
