"""Command line entry point.

Exit status: 0 on success, 1 when a solve or a validation fails (details in
``failure.json`` in the output directory), 2 when the configuration cannot be
parsed. Log verbosity is read from ``DEEPQUENCH_LOG`` (e.g. ``INFO``).
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, validate_config
from .errors import DomainError, GridError, NumericError, SolverError, ValidationError
from .export import (
    export_plot_data,
    read_control,
    write_adjoint,
    write_control,
    write_iterations,
    write_path_summary,
    write_trajectory,
)
from .adjoint import compute_lambda
from .optimize import optimize_P_alpha, project_control
from .quench import run_continuation
from .state import regularized_initial_data, solve_state_alpha, solve_state_obstacle

log = logging.getLogger("deepquench")


def _write_failure(out, exc, extra=None):
    record = {
        "status": "failed",
        "error": type(exc).__name__ if exc is not None else "PathFailure",
        "message": str(exc) if exc is not None else "",
    }
    if getattr(exc, "step", None) is not None:
        record["step"] = exc.step
    if isinstance(exc, ValidationError):
        record["violations"] = [{"code": c, "detail": d} for c, d in exc.violations]
    if extra:
        record.update(extra)
    out.mkdir(parents=True, exist_ok=True)
    (out / "failure.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_anchor(cfg, problem):
    g, tg = problem.model.grid, problem.model.time
    path = Path(cfg["quench.anchor_file"])
    if not path.is_absolute():
        path = cfg.base_dir / path
    surface = path.with_name(path.stem + "_surface" + path.suffix)
    return read_control(path, surface, g, tg)


def _run_quench(cfg, problem, out, fail_fast):
    common = dict(options=problem.optimizer, fail_fast=fail_fast)
    args = (problem.schedule, problem.initial, problem.cost, problem.bounds, problem.model)
    g, tg = problem.model.grid, problem.model.time
    init = project_control(problem.control, problem.bounds)
    anchor = None
    if cfg["quench.anchor"] == "fixed":
        if cfg["quench.anchor_file"]:
            anchor = _load_anchor(cfg, problem)
        else:
            plain = run_continuation(*args, anchor_mode="none", init=init, **common)
            write_path_summary(out / "path_summary_plain.csv", plain)
            done = plain.successful()
            if not done:
                raise SolverError("plain continuation produced no anchor")
            anchor = done[-1].control
            write_control(out, anchor, g, tg, stem="anchor")
    path = run_continuation(*args, anchor_mode=cfg["quench.anchor"], anchor=anchor, init=init, **common)
    write_path_summary(out / "path_summary.csv", path)
    for k, rec in enumerate(path.records):
        if not rec.failed:
            write_iterations(out / f"iterations_alpha_{k}.csv", rec.result.log)
    export_plot_data(path, out / "plot")
    done = path.successful()
    if done:
        write_control(out, done[-1].control, g, tg)
    failed = [rec.alpha for rec in path.records if rec.failed]
    if failed:
        _write_failure(out, None, {"message": "some alpha records failed", "failed_alphas": failed,
                                   "errors": [r.error for r in path.records if r.failed]})
        return 1
    return 0


def run(cfg, out=None, fail_fast=None):
    """Execute ``cfg["mode"]`` and write its artifacts; returns the exit status."""
    out = Path(out if out is not None else cfg["out"])
    fail_fast = cfg["fail_fast"] if fail_fast is None else fail_fast
    mode = cfg["mode"]
    try:
        problem = validate_config(cfg)
        if mode == "validate":
            out.mkdir(parents=True, exist_ok=True)
            (out / "config.txt").write_text(cfg.dump(), encoding="utf-8")
            return 0
        m, d = problem.model, problem.initial
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(cfg.dump(), encoding="utf-8")
        alpha = cfg["quench.alpha"]
        if mode == "state":
            traj = solve_state_alpha(problem.control, regularized_initial_data(d, alpha, m.options), alpha, m)
            write_trajectory(out, traj)
        elif mode == "obstacle":
            write_trajectory(out, solve_state_obstacle(problem.control, d, m))
        elif mode == "optimize":
            init = project_control(problem.control, problem.bounds)
            res = optimize_P_alpha(alpha, init, d, problem.cost, problem.bounds, m, options=problem.optimizer)
            write_control(out, res.control, m.grid, m.time)
            write_trajectory(out, res.state)
            write_adjoint(out, res.adjoint, compute_lambda(res.state, res.adjoint, alpha, m))
            write_iterations(out / "iterations.csv", res.log)
            if not res.converged:
                _write_failure(out, None, {"message": res.message, "vi_residual": res.vi_residual})
                return 1
        elif mode == "quench":
            return _run_quench(cfg, problem, out, fail_fast)
        return 0
    except (ValidationError, SolverError, NumericError, DomainError, GridError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        _write_failure(out, exc)
        return 1


def _parser():
    ap = argparse.ArgumentParser(prog="deepquench", description="Deep-quench optimal control of Allen-Cahn systems.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("state", "regularized state solve at quench.alpha"),
        ("obstacle", "double-obstacle state solve"),
        ("optimize", "optimal control at quench.alpha"),
        ("quench", "continuation over quench.schedule"),
        ("validate", "check the configuration only"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="key = value file; defaults are used when omitted")
        p.add_argument("--out", type=Path, help="output directory (overrides the 'out' key)")
        p.add_argument("--fail-fast", action="store_true", help="abort a continuation at the first failed alpha")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    level = os.environ.get("DEEPQUENCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
    except ConfigError as exc:
        print(f"deepquench: malformed config:\n{exc}", file=sys.stderr)
        return 2
    cfg = cfg.with_values(mode=args.command)
    status = run(cfg, out=args.out, fail_fast=True if args.fail_fast else None)
    if status and args.command == "validate":
        print((Path(args.out or cfg["out"]) / "failure.json").read_text(encoding="utf-8"), file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
