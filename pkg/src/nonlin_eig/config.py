"""Experiment configuration: JSON schema, validation, and instantiation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .functional import SpdInstance
from .grid import ConfigError, build_domain, build_stencil, eval_initial_guess, \
    load_snapshot, mean_value_constant
from .newton import NewtonSettings
from .plaplace import PLaplaceInstance

SOLVERS = ("ipm", "ppm", "balanced", "geometric")


@dataclass
class ExperimentConfig:
    problem: dict
    initial: dict
    solver: dict
    newton: NewtonSettings
    output: dict
    path: str | None = None
    resolved: dict = field(default_factory=dict)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    return parse_config(raw, path=str(path))


def parse_config(raw: dict, path: str | None = None) -> ExperimentConfig:
    _require(isinstance(raw, dict), "config must be a JSON object")
    for key in ("problem", "solver"):
        _require(key in raw, f"missing config section {key!r}")
    problem = raw["problem"]
    kind = problem.get("kind")
    _require(kind in ("spd", "plaplace"), f"problem.kind must be spd or plaplace, got {kind!r}")
    if kind == "plaplace":
        p = problem.get("p")
        _require(isinstance(p, (int, float)) and p > 1, "problem.p must be a real > 1")
        _require(problem.get("shape") in ("square", "lshape"),
                 "problem.shape must be square or lshape")
        _require(problem.get("h", 0) > 0, "problem.h must be positive")
        _require(problem.get("side", 0) > 0, "problem.side must be positive")
        _require("r" in problem or "r_rule" in problem,
                 "problem needs either r or r_rule")
    else:
        _require("matrix" in problem, "spd problem needs a matrix literal")

    solver = raw["solver"]
    _require(solver.get("kind") in SOLVERS,
             f"solver.kind must be one of {SOLVERS}")
    iters = solver.get("iters", 30)
    _require(isinstance(iters, int) and iters >= 1, "solver.iters must be >= 1")
    if solver.get("kind") == "ppm":
        _require(solver.get("tau", 0) > 0, "ppm needs solver.tau > 0")

    newton_raw = raw.get("newton", {})
    newton = NewtonSettings(
        tol_abs=newton_raw.get("tol_abs", 1e-12),
        max_iter=newton_raw.get("max_iter", 500),
        cg_tol=newton_raw.get("cg_tol", 1e-10),
        cg_max_iter=newton_raw.get("cg_max_iter"))

    initial = raw.get("initial", {"kind": "ex1"})
    _require(initial.get("kind") in ("ex1", "ex2", "expression", "file"),
             "initial.kind must be ex1, ex2, expression or file")

    output = raw.get("output", {})
    return ExperimentConfig(problem=problem, initial=initial, solver=solver,
                            newton=newton, output=output, path=path)


def resolve_radius(problem: dict) -> float:
    """Apply the r_rule if present; 'consistency' uses h = r^1.6."""
    if "r" in problem:
        return float(problem["r"])
    rule = problem["r_rule"]
    h = float(problem["h"])
    kind = rule.get("type")
    if kind == "fixed":
        return float(rule["value"])
    if kind == "h_pow":
        return h ** float(rule["exponent"])
    if kind == "consistency":
        return h ** (1.0 / 1.6)
    raise ConfigError(f"unknown r_rule type {kind!r}")


def build_instance(cfg: ExperimentConfig):
    """Instantiate the functional pair and initial vector from a config.

    Returns (pair, u0, resolved) where resolved echoes every derived
    parameter (D_{2,p}, epsilon, radius, node counts) for run.json.
    """
    problem = cfg.problem
    resolved = {"problem": dict(problem), "solver": dict(cfg.solver),
                "newton": {"tol_abs": cfg.newton.tol_abs,
                           "max_iter": cfg.newton.max_iter,
                           "cg_tol": cfg.newton.cg_tol,
                           "cg_max_iter": cfg.newton.cg_max_iter}}
    if problem["kind"] == "spd":
        pair = SpdInstance(problem["matrix"])
        init = cfg.initial
        if init["kind"] == "file":
            u0 = np.loadtxt(init["path"], delimiter=",")
        else:
            u0 = np.asarray(init.get("vector", np.ones(pair.n)), dtype=float)
        resolved["n"] = pair.n
        cfg.resolved = resolved
        return pair, u0, resolved

    p = float(problem["p"])
    h = float(problem["h"])
    side = float(problem["side"])
    r = resolve_radius(problem)
    _require(r >= h, f"resolved radius r={r} < h={h}")
    domain = build_domain(problem["shape"], side, h)
    d2p = problem.get("d2p")
    stencil = build_stencil(domain, r, p, d2p=d2p)
    epsilon = float(problem.get("epsilon", 1e-9))
    pair = PLaplaceInstance(domain, stencil, p, epsilon=epsilon)
    init = cfg.initial
    if init["kind"] == "file":
        u0 = load_snapshot(init["path"], domain).values
    else:
        u0 = eval_initial_guess(init["kind"], domain,
                                expression=init.get("expression")).values
    resolved.update({
        "r": r, "d2p": stencil.d2p, "epsilon": epsilon,
        "stencil_offsets": int(len(stencil.offsets)),
        "stencil_weight": stencil.weight,
        "nx": domain.nx, "ny": domain.ny,
        "n_interior": domain.n_interior,
        "d2p_default": mean_value_constant(p),
    })
    cfg.resolved = resolved
    return pair, u0, resolved
