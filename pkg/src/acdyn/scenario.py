"""Scenario configuration: parsing, validation, and problem assembly.

A scenario is a JSON document with blocks ``domain``, ``graphs``,
``perturbation``, ``data``, ``constraint``, ``solver``, and ``output``.
Spatial data come from a small function catalog (constant, linear in x,
sine in x, tanh profile in x, and sums of these), optionally modulated
in time (constant or sinusoidal factor).  Barriers may be null, which
encodes an unbounded side of the mass band.

Validation reports every violated assumption with its label: (p2) for
degenerate or negative weights, (p3) for an initial mass outside the
band, (p4) for initial data outside a graph domain, (pilip) for an
understated Lipschitz constant, and (inidata) for structural defects of
the data pair.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import graphs as gr
from .constraint import ConstraintSpec, make_constraint, mass, mass_tolerance
from .mesh import CoupledField, DiscreteSystem, assemble, build_domain
from .stepper import PerturbationSpec, SolverConfig

__all__ = [
    "Scenario",
    "Problem",
    "ScenarioError",
    "space_function",
    "time_factor",
    "validate",
    "validate_or_raise",
    "build_problem",
    "data_independent_dict",
    "load_scenario",
    "dump_scenario",
]


class ScenarioError(ValueError):
    """Raised when a scenario fails validation."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


# ---------------------------------------------------------------------------
# function catalog


def space_function(cfg: dict) -> Callable[[np.ndarray], np.ndarray]:
    """Catalog spatial profile, evaluated on the first coordinate."""
    kind = cfg.get("kind")
    if kind == "constant":
        v = float(cfg["value"])
        return lambda x: np.full(x.shape[0], v)
    if kind == "linear_x":
        a, b = float(cfg.get("intercept", 0.0)), float(cfg.get("slope", 1.0))
        return lambda x: a + b * x[:, 0]
    if kind == "sine_x":
        amp = float(cfg.get("amplitude", 1.0))
        freq = float(cfg.get("frequency", 1.0))
        return lambda x: amp * np.sin(math.pi * freq * x[:, 0])
    if kind == "tanh_x":
        c, w = float(cfg.get("center", 0.0)), float(cfg.get("width", 1.0))
        return lambda x: np.tanh((x[:, 0] - c) / w)
    if kind == "sum":
        parts = [space_function(term) for term in cfg["terms"]]
        return lambda x: sum(part(x) for part in parts)
    raise ValueError(f"unknown spatial function kind {cfg.get('kind')!r}")


def time_factor(cfg: dict | None) -> Callable[[float], float]:
    if cfg is None or cfg.get("kind", "constant") == "constant":
        return lambda t: 1.0
    if cfg.get("kind") == "sinusoidal":
        omega = float(cfg.get("omega", 1.0))
        phase = float(cfg.get("phase", 0.0))
        return lambda t: math.cos(omega * t + phase)
    raise ValueError(f"unknown time modulation kind {cfg.get('kind')!r}")


_DEFAULT_SOLVER = {
    "tau": 0.01,
    "T": 1.0,
    "eps": 0.1,
    "mode": "semi_implicit",
    "newton_tol": 1e-11,
    "newton_max_iter": 60,
    "lambda_tol": 1e-11,
    "lambda_max_iter": 200,
}

_ZERO_FUNC = {"kind": "constant", "value": 0.0}


@dataclass(frozen=True)
class Scenario:
    """Normalized scenario document."""

    domain: dict
    graphs: dict
    perturbation: dict
    data: dict
    constraint: dict
    solver: dict
    output: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        raw = copy.deepcopy(raw)
        data = raw.get("data", {})
        data.setdefault("f", {"space": dict(_ZERO_FUNC), "time": {"kind": "constant"}})
        data.setdefault("f_gamma", {"space": dict(_ZERO_FUNC), "time": {"kind": "constant"}})
        data.setdefault("u0", dict(_ZERO_FUNC))
        data.setdefault("u0_gamma", None)
        solver = dict(_DEFAULT_SOLVER)
        solver.update(raw.get("solver", {}))
        constraint = raw.get("constraint", {})
        constraint.setdefault("w", {"kind": "constant", "value": 1.0})
        constraint.setdefault("w_gamma", {"kind": "constant", "value": 1.0})
        constraint.setdefault("k_lo", None)
        constraint.setdefault("k_hi", None)
        pert = raw.get("perturbation", {})
        pert.setdefault("bulk", {"kind": "zero"})
        pert.setdefault("boundary", {"kind": "zero"})
        pert.setdefault("lipschitz_bulk", 0.0)
        pert.setdefault("lipschitz_bnd", 0.0)
        graphs_blk = raw.get("graphs", {})
        graphs_blk.setdefault("bulk", {"kind": "zero"})
        graphs_blk.setdefault("boundary", {"kind": "zero"})
        graphs_blk.setdefault("rho", 1.0)
        return cls(
            domain=raw.get("domain", {}),
            graphs=graphs_blk,
            perturbation=pert,
            data=data,
            constraint=constraint,
            solver=solver,
            output=raw.get("output", {}),
        )

    def to_dict(self) -> dict:
        return copy.deepcopy(
            {
                "domain": self.domain,
                "graphs": self.graphs,
                "perturbation": self.perturbation,
                "data": self.data,
                "constraint": self.constraint,
                "solver": self.solver,
                "output": self.output,
            }
        )

    def with_data(self, **updates) -> "Scenario":
        d = self.to_dict()
        d["data"].update(updates)
        return Scenario.from_dict(d)

    def with_solver(self, **updates) -> "Scenario":
        d = self.to_dict()
        d["solver"].update(updates)
        return Scenario.from_dict(d)


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return Scenario.from_dict(json.load(fh))


def dump_scenario(scenario: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _barrier(value, side: str) -> float:
    if value is None:
        return -math.inf if side == "lo" else math.inf
    return float(value)


@dataclass(frozen=True)
class Problem:
    """Scenario materialized into solver-ready components."""

    scenario: Scenario
    sys: DiscreteSystem
    graphs: gr.GraphPair
    perturbation: PerturbationSpec
    solver: SolverConfig
    constraint: ConstraintSpec
    u0: CoupledField
    f_of_t: Callable[[float], CoupledField]


def _build_unchecked(scenario: Scenario) -> Problem:
    dom_blk = scenario.domain
    domain = build_domain(
        dom_blk["kind"], dom_blk["sizes"], dom_blk["resolution"]
    )
    sys = assemble(domain)
    gp = gr.GraphPair(
        bulk=gr.graph_from_config(scenario.graphs["bulk"]),
        bnd=gr.graph_from_config(scenario.graphs["boundary"]),
    )
    pert = PerturbationSpec(
        bulk_kind=scenario.perturbation["bulk"]["kind"],
        bnd_kind=scenario.perturbation["boundary"]["kind"],
        bulk_params={
            k: v for k, v in scenario.perturbation["bulk"].items() if k != "kind"
        },
        bnd_params={
            k: v for k, v in scenario.perturbation["boundary"].items() if k != "kind"
        },
        lipschitz_bulk=float(scenario.perturbation["lipschitz_bulk"]),
        lipschitz_bnd=float(scenario.perturbation["lipschitz_bnd"]),
    )
    cfg = SolverConfig(
        tau=float(scenario.solver["tau"]),
        T=float(scenario.solver["T"]),
        eps=float(scenario.solver["eps"]),
        rho=float(scenario.graphs["rho"]),
        newton_tol=float(scenario.solver["newton_tol"]),
        newton_max_iter=int(scenario.solver["newton_max_iter"]),
        lambda_tol=float(scenario.solver["lambda_tol"]),
        lambda_max_iter=int(scenario.solver["lambda_max_iter"]),
        mode=scenario.solver["mode"],
    )
    xb = domain.coords
    xg = domain.coords[domain.boundary_idx]
    w = sys.field(
        space_function(scenario.constraint["w"])(xb),
        space_function(scenario.constraint["w_gamma"])(xg),
    )
    cons = make_constraint(
        sys,
        w,
        _barrier(scenario.constraint["k_lo"], "lo"),
        _barrier(scenario.constraint["k_hi"], "hi"),
    )
    u0_bulk = space_function(scenario.data["u0"])(xb)
    if scenario.data["u0_gamma"] is None:
        u0 = sys.field_from_bulk(u0_bulk)
    else:
        u0 = sys.field(u0_bulk, space_function(scenario.data["u0_gamma"])(xg))

    f_space = space_function(scenario.data["f"]["space"])(xb)
    f_time = time_factor(scenario.data["f"].get("time"))
    fg_space = space_function(scenario.data["f_gamma"]["space"])(xg)
    fg_time = time_factor(scenario.data["f_gamma"].get("time"))

    def f_of_t(t: float) -> CoupledField:
        return CoupledField(f_time(t) * f_space, fg_time(t) * fg_space)

    return Problem(scenario, sys, gp, pert, cfg, cons, u0, f_of_t)


def validate(scenario: Scenario) -> list[str]:
    """Check every scenario assumption; return the list of violations."""
    errors: list[str] = []
    try:
        dom_blk = scenario.domain
        domain = build_domain(dom_blk["kind"], dom_blk["sizes"], dom_blk["resolution"])
        sys = assemble(domain)
    except (KeyError, ValueError, TypeError) as exc:
        return [f"(domain) {exc}"]

    try:
        gp = gr.GraphPair(
            bulk=gr.graph_from_config(scenario.graphs["bulk"]),
            bnd=gr.graph_from_config(scenario.graphs["boundary"]),
        )
    except (KeyError, ValueError, TypeError) as exc:
        return [f"(graphs) {exc}"]
    if float(scenario.graphs.get("rho", 1.0)) <= 0.0:
        errors.append("(graphs) rho must be positive")

    pert = PerturbationSpec(
        bulk_kind=scenario.perturbation["bulk"]["kind"],
        bnd_kind=scenario.perturbation["boundary"]["kind"],
        bulk_params={k: v for k, v in scenario.perturbation["bulk"].items() if k != "kind"},
        bnd_params={k: v for k, v in scenario.perturbation["boundary"].items() if k != "kind"},
        lipschitz_bulk=float(scenario.perturbation["lipschitz_bulk"]),
        lipschitz_bnd=float(scenario.perturbation["lipschitz_bnd"]),
    )
    for name, worst, declared in pert.lipschitz_violations():
        errors.append(
            f"(pilip) declared {name} Lipschitz constant {declared} is exceeded "
            f"by a sampled slope {worst:.6g} on [-5, 5]"
        )

    # weight assumptions are checked before the build, which requires them
    xb = domain.coords
    xg = domain.coords[domain.boundary_idx]
    try:
        w_bulk = space_function(scenario.constraint["w"])(xb)
        w_bnd = space_function(scenario.constraint["w_gamma"])(xg)
    except (KeyError, ValueError, TypeError) as exc:
        return errors + [f"(constraint) {exc}"]
    if np.any(w_bulk < 0.0) or np.any(w_bnd < 0.0):
        errors.append("(p2) weights must be nonnegative")
    else:
        sigma0 = float(np.dot(sys.M_bulk, w_bulk) + np.dot(sys.M_bnd, w_bnd))
        if sigma0 <= 0.0:
            errors.append(
                f"(p2) total weight {sigma0} is not positive (degenerate weights)"
            )
    k_lo = _barrier(scenario.constraint["k_lo"], "lo")
    k_hi = _barrier(scenario.constraint["k_hi"], "hi")
    if not k_lo <= k_hi:
        errors.append(f"(constraint) k_lo={k_lo} exceeds k_hi={k_hi}")
    if errors:
        return errors

    try:
        prob = _build_unchecked(scenario)
    except (KeyError, ValueError, TypeError) as exc:
        return [f"(scenario) {exc}"]

    cons = prob.constraint

    u0 = prob.u0
    if not sys.check_trace(u0):
        errors.append("(inidata) initial boundary data is not the trace of the bulk data")
    k0 = mass(sys, cons, u0)
    tol_k = mass_tolerance(cons)
    if not cons.k_lo - tol_k <= k0 <= cons.k_hi + tol_k:
        errors.append(
            f"(p3) initial mass {k0:.17g} violates "
            f"k_lo={cons.k_lo:.17g} <= k <= k_hi={cons.k_hi:.17g}"
        )
    if not np.all(np.isfinite(np.asarray(gp.bulk.primitive(u0.bulk)))):
        errors.append("(p4) bulk primitive of the initial data is not integrable")
    if not np.all(np.isfinite(np.asarray(gp.bnd.primitive(u0.bnd)))):
        errors.append("(p4) boundary primitive of the initial data is not integrable")
    return errors


def validate_or_raise(scenario: Scenario) -> Scenario:
    errors = validate(scenario)
    if errors:
        raise ScenarioError(errors)
    return scenario


def build_problem(scenario: Scenario) -> Problem:
    """Validate and materialize a scenario."""
    validate_or_raise(scenario)
    return _build_unchecked(scenario)


def data_independent_dict(scenario: Scenario) -> dict:
    """Scenario content excluding the data and output blocks."""
    d = scenario.to_dict()
    d.pop("data", None)
    d.pop("output", None)
    return d
