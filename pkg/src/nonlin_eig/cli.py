"""Command line entry point.

    nonlin-eig run <config.json> [--threads N] [--out DIR]
    nonlin-eig validate [--scale quick|full]
    nonlin-eig describe <config.json>

Exit codes: 0 success, 1 validation/config error, 2 invariant failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import eigensolvers, metrics, validation
from .config import ExperimentConfig, build_instance, load_config
from .grid import ConfigError, GridFunction, save_snapshot
from .plaplace import PLaplaceInstance


def _run_solver(pair, u0, cfg: ExperimentConfig, snapshot_cb):
    solver = cfg.solver
    kind = solver["kind"]
    iters = solver.get("iters", 30)
    residual_tol = solver.get("residual_tol")
    if kind == "ipm":
        return eigensolvers.run_ipm(pair, u0, iters, cfg.newton,
                                    residual_tol=residual_tol,
                                    snapshot_cb=snapshot_cb)
    if kind == "ppm":
        return eigensolvers.run_ppm(pair, u0, solver["tau"], iters, cfg.newton,
                                    residual_tol=residual_tol,
                                    snapshot_cb=snapshot_cb)
    if kind == "balanced":
        if not isinstance(pair, PLaplaceInstance):
            raise ConfigError("balanced solver requires a plaplace problem")
        return eigensolvers.run_balanced_ipm(pair, u0, iters, cfg.newton,
                                             snapshot_cb=snapshot_cb)
    if kind == "geometric":
        return eigensolvers.run_geometric(pair, u0, iters,
                                          snapshot_cb=snapshot_cb)
    raise ConfigError(f"unknown solver {kind!r}")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    pair, u0, resolved = build_instance(cfg)
    out_dir = Path(args.out or cfg.output.get("dir", "runs/latest"))
    out_dir.mkdir(parents=True, exist_ok=True)
    snapshot_every = int(cfg.output.get("snapshot_every", 0))
    solver_kind = cfg.solver["kind"]
    is_grid = isinstance(pair, PLaplaceInstance)

    def snapshot_cb(k, u):
        if is_grid and snapshot_every and k % snapshot_every == 0:
            save_snapshot(out_dir / f"{solver_kind}_iter{k}.csv",
                          GridFunction(u, pair.domain))

    trace = _run_solver(pair, u0, cfg, snapshot_cb)

    metrics.records_to_csv(trace.records, out_dir / "metrics.csv")
    if is_grid:
        save_snapshot(out_dir / "final.csv", GridFunction(trace.final_u, pair.domain))
    else:
        np.savetxt(out_dir / "final.csv", trace.final_u, delimiter=",")
    run_info = {
        "config": resolved,
        "output_dir": str(out_dir),
        "threads": args.threads,
        "solver_tag": trace.solver_tag,
        "converged": trace.converged,
        "stop_reason": trace.stop_reason,
        "final_lambda": trace.final_lambda,
        "extras": {k: v for k, v in trace.extras.items()
                   if isinstance(v, (int, float, str, list))},
    }
    (out_dir / "run.json").write_text(json.dumps(run_info, indent=2))
    print(f"{trace.solver_tag}: {len(trace.records)} iterations, "
          f"lambda = {trace.final_lambda:.10g}, stop_reason = {trace.stop_reason}")
    return 0


def cmd_describe(args) -> int:
    cfg = load_config(args.config)
    _, _, resolved = build_instance(cfg)
    print(json.dumps(resolved, indent=2))
    return 0


def cmd_validate(args) -> int:
    ok = validation.run_suite(scale=args.scale)
    return 0 if ok else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nonlin-eig",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config")
    p_run.add_argument("config")
    p_run.add_argument("--threads", type=int, default=None,
                       help="thread hint for data-parallel kernels")
    p_run.add_argument("--out", default=None, help="override output directory")
    p_run.set_defaults(fn=cmd_run)

    p_val = sub.add_parser("validate", help="run the invariant suite")
    p_val.add_argument("--scale", choices=("quick", "full"), default="quick")
    p_val.set_defaults(fn=cmd_validate)

    p_desc = sub.add_parser("describe", help="print resolved parameters")
    p_desc.add_argument("config")
    p_desc.set_defaults(fn=cmd_describe)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
