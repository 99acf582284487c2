"""Energy evaluation and the verification harnesses.

The harnesses re-measure, on computed trajectories, the quantities whose
boundedness and stability the scheme is supposed to deliver: the convex
energy along the flow, per-run norm monitors that must stay bounded as
the regularization parameter decreases, the two-run continuous
dependence estimate with its explicit Gronwall constant, and the Cauchy
behavior of trajectories under a decreasing regularization sweep.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import graphs as gr
from .mesh import CoupledField, DiscreteSystem, inner_H
from .stepper import SolverConfig, StepRecord

__all__ = [
    "EnergyBreakdown",
    "energy",
    "monitor_bounds",
    "monitors_no_growth",
    "ContinuousDependenceReport",
    "continuous_dependence",
    "eps_sweep",
    "harness_threads",
]


def harness_threads() -> int:
    """Parallelism cap for independent harness runs (ACDYN_THREADS)."""
    raw = os.environ.get("ACDYN_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class EnergyBreakdown:
    """The six summands of the convex energy, and their total."""

    grad_bulk: float
    envelope_bulk: float
    quad_bulk_eps: float
    grad_bnd: float
    envelope_bnd: float
    quad_bnd_eps: float

    @property
    def total(self) -> float:
        return (
            self.grad_bulk
            + self.envelope_bulk
            + self.quad_bulk_eps
            + self.grad_bnd
            + self.envelope_bnd
            + self.quad_bnd_eps
        )

    @property
    def finite(self) -> bool:
        return math.isfinite(self.total)


def energy(
    sys: DiscreteSystem, gp: gr.GraphPair, cfg: SolverConfig, u: CoupledField,
    eps: float | None = None,
) -> EnergyBreakdown:
    """Quadrature evaluation of the energy summands at a field.

    With ``eps=0`` the unregularized energy is evaluated: the envelopes
    are replaced by the primitives themselves (which may be infinite for
    obstacle graphs outside their interval; the result is then flagged
    through ``finite``) and the quadratic terms vanish.
    """
    e = cfg.eps if eps is None else float(eps)
    if e == 0.0:
        env_b = np.asarray(gp.bulk.primitive(u.bulk))
        env_g = np.asarray(gp.bnd.primitive(u.bnd))
        quad_b = quad_g = 0.0
    else:
        p_bulk = gr.YosidaParams(e, cfg.rho, "bulk")
        p_bnd = gr.YosidaParams(e, cfg.rho, "boundary")
        env_b = np.asarray(gr.moreau(gp.bulk, p_bulk, u.bulk))
        env_g = np.asarray(gr.moreau(gp.bnd, p_bnd, u.bnd))
        quad_b = 0.5 * e * float(np.dot(sys.M_bulk, u.bulk**2))
        quad_g = 0.5 * e * float(np.dot(sys.M_bnd, u.bnd**2))
    return EnergyBreakdown(
        grad_bulk=0.5 * float(u.bulk @ (sys.A_bulk @ u.bulk)),
        envelope_bulk=float(np.dot(sys.M_bulk, env_b)),
        quad_bulk_eps=quad_b,
        grad_bnd=0.5 * float(u.bnd @ (sys.A_bnd @ u.bnd)),
        envelope_bnd=float(np.dot(sys.M_bnd, env_g)),
        quad_bnd_eps=quad_g,
    )


# ---------------------------------------------------------------------------
# per-run monitors

MONITOR_COLUMNS = (
    "dudt_l2_bulk",
    "sup_v_bulk",
    "sup_env_bulk",
    "dudt_l2_bnd",
    "sup_v_bnd",
    "sup_env_bnd",
    "lambda_l2",
    "xi_l2_bulk",
    "xi_l2_bnd",
    "lap_l2_bulk",
    "flux_l2",
    "lap_l2_bnd",
)


def _run_monitors(
    sys: DiscreteSystem, gp: gr.GraphPair, cfg: SolverConfig, traj: list[StepRecord]
) -> dict[str, float]:
    tau = cfg.tau
    Mb, Mg = sys.M_bulk, sys.M_bnd
    interior = np.ones(sys.n_bulk, dtype=bool)
    interior[sys.bidx] = False
    p_bulk = gr.YosidaParams(cfg.eps, cfg.rho, "bulk")
    p_bnd = gr.YosidaParams(cfg.eps, cfg.rho, "boundary")

    dudt_b = dudt_g = lam_sq = xi_b = xi_g = lap_b = flux_sq = lap_g = 0.0
    sup_v_b = sup_v_g = sup_env_b = sup_env_g = 0.0
    for prev, rec in zip(traj[:-1], traj[1:]):
        db = (rec.u.bulk - prev.u.bulk) / tau
        dg = (rec.u.bnd - prev.u.bnd) / tau
        dudt_b += tau * float(np.dot(Mb, db**2))
        dudt_g += tau * float(np.dot(Mg, dg**2))
        lam_sq += tau * rec.lam**2
        xi_b += tau * float(np.dot(Mb, rec.xi.bulk**2))
        xi_g += tau * float(np.dot(Mg, rec.xi.bnd**2))
        au = sys.A_bulk @ rec.u.bulk
        lap_int = au[interior] / Mb[interior]
        lap_b += tau * float(np.dot(Mb[interior], lap_int**2))
        flux = au[sys.bidx] / Mg
        flux_sq += tau * float(np.dot(Mg, flux**2))
        ag = (sys.A_bnd @ rec.u.bnd) / Mg
        lap_g += tau * float(np.dot(Mg, ag**2))
    for rec in traj:
        u = rec.u
        sup_v_b = max(
            sup_v_b,
            math.sqrt(float(np.dot(Mb, u.bulk**2)) + float(u.bulk @ (sys.A_bulk @ u.bulk))),
        )
        sup_v_g = max(
            sup_v_g,
            math.sqrt(float(np.dot(Mg, u.bnd**2)) + float(u.bnd @ (sys.A_bnd @ u.bnd))),
        )
        env_b = np.asarray(gr.moreau(gp.bulk, p_bulk, u.bulk))
        env_g = np.asarray(gr.moreau(gp.bnd, p_bnd, u.bnd))
        sup_env_b = max(sup_env_b, float(np.dot(Mb, env_b)))
        sup_env_g = max(sup_env_g, float(np.dot(Mg, env_g)))
    return {
        "dudt_l2_bulk": math.sqrt(dudt_b),
        "sup_v_bulk": sup_v_b,
        "sup_env_bulk": sup_env_b,
        "dudt_l2_bnd": math.sqrt(dudt_g),
        "sup_v_bnd": sup_v_g,
        "sup_env_bnd": sup_env_g,
        "lambda_l2": math.sqrt(lam_sq),
        "xi_l2_bulk": math.sqrt(xi_b),
        "xi_l2_bnd": math.sqrt(xi_g),
        "lap_l2_bulk": math.sqrt(lap_b),
        "flux_l2": math.sqrt(flux_sq),
        "lap_l2_bnd": math.sqrt(lap_g),
    }


def monitor_bounds(
    sys: DiscreteSystem,
    gp: gr.GraphPair,
    runs: list[tuple[SolverConfig, list[StepRecord]]],
) -> dict[str, list[float]]:
    """Tabulate the norm monitors for runs differing only in eps.

    Returns one column per monitored quantity, one entry per run, in the
    order given.  All entries are finite by construction of the records.
    """
    table: dict[str, list[float]] = {name: [] for name in MONITOR_COLUMNS}
    table["eps"] = []
    for cfg, traj in runs:
        row = _run_monitors(sys, gp, cfg, traj)
        table["eps"].append(cfg.eps)
        for name in MONITOR_COLUMNS:
            table[name].append(row[name])
    return table


def monitors_no_growth(table: dict[str, list[float]]) -> bool:
    """True when no monitor column grows: max within twice the median."""
    for name in MONITOR_COLUMNS:
        vals = np.asarray(table[name], dtype=float)
        if vals.size == 0:
            continue
        if float(vals.max()) > 2.0 * float(np.median(vals)) + 1e-12:
            return False
    return True


# ---------------------------------------------------------------------------
# continuous dependence


@dataclass
class ContinuousDependenceReport:
    constant: float
    times: list[float]
    lhs: list[float]
    rhs: list[float]

    @property
    def max_ratio(self) -> float:
        worst = 0.0
        for left, right in zip(self.lhs, self.rhs):
            if right > 0.0:
                worst = max(worst, left / right)
            elif left > 1e-14:
                worst = math.inf
        return worst


def gronwall_constant(lipschitz_bulk: float, lipschitz_bnd: float, T: float) -> float:
    """Stability constant depending only on the Lipschitz bounds and T."""
    return math.exp((2.0 + lipschitz_bulk**2 + lipschitz_bnd**2) * T)


def continuous_dependence(scenario1, scenario2) -> ContinuousDependenceReport:
    """Two-run stability check of the difference against the data distance.

    Both scenarios must agree except in the source terms and initial
    data.  At every time level the accumulated left side (squared
    difference plus twice the time-integrated stiffness forms of the
    difference) is compared with the constant times the squared data
    distance, time integration by the right-endpoint rectangle rule.
    """
    from .scenario import build_problem, data_independent_dict
    from .stepper import simulate

    if data_independent_dict(scenario1) != data_independent_dict(scenario2):
        raise ValueError(
            "scenarios may differ only in their source and initial data"
        )
    p1 = build_problem(scenario1)
    p2 = build_problem(scenario2)
    sys = p1.sys
    cfg = p1.solver
    with ThreadPoolExecutor(max_workers=min(2, harness_threads())) as pool:
        f1 = pool.submit(
            simulate, p1.sys, p1.graphs, p1.constraint, p1.perturbation, p1.solver,
            p1.u0, p1.f_of_t,
        )
        f2 = pool.submit(
            simulate, p2.sys, p2.graphs, p2.constraint, p2.perturbation, p2.solver,
            p2.u0, p2.f_of_t,
        )
        traj1, traj2 = f1.result(), f2.result()

    C = gronwall_constant(
        p1.perturbation.lipschitz_bulk, p1.perturbation.lipschitz_bnd, cfg.T
    )
    n_steps = len(traj1) - 1
    e0 = traj1[0].u - traj2[0].u
    data_dist = inner_H(sys, e0, e0)
    for m in range(1, n_steps + 1):
        t = m * cfg.tau
        df = p1.f_of_t(t) - p2.f_of_t(t)
        data_dist += cfg.tau * inner_H(sys, df, df)

    times, lhs_list, rhs_list = [], [], []
    accum = 0.0
    rhs = C * data_dist
    for m in range(1, n_steps + 1):
        e = traj1[m].u - traj2[m].u
        accum += 2.0 * cfg.tau * float(e.bulk @ (sys.A_bulk @ e.bulk))
        accum += 2.0 * cfg.tau * float(e.bnd @ (sys.A_bnd @ e.bnd))
        lhs = inner_H(sys, e, e) + accum
        times.append(m * cfg.tau)
        lhs_list.append(lhs)
        rhs_list.append(rhs)
    return ContinuousDependenceReport(C, times, lhs_list, rhs_list)


# ---------------------------------------------------------------------------
# regularization sweep


def eps_sweep(scenario, eps_list) -> dict:
    """Cauchy table of trajectory distances under decreasing eps.

    Runs the scenario for every eps in the strictly decreasing list and
    tabulates d_j, the largest over time of the state distance between
    consecutive runs, together with the per-run norm monitors.
    """
    from .scenario import build_problem
    from .stepper import simulate

    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list[:-1], eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")

    prob = build_problem(scenario)

    def run_one(eps: float):
        cfg = replace(prob.solver, eps=eps)
        traj = simulate(
            prob.sys, prob.graphs, prob.constraint, prob.perturbation, cfg,
            prob.u0, prob.f_of_t,
        )
        return cfg, traj

    with ThreadPoolExecutor(max_workers=harness_threads()) as pool:
        runs = list(pool.map(run_one, eps_list))

    sys = prob.sys
    diffs = []
    for (_, ta), (_, tb) in zip(runs[:-1], runs[1:]):
        worst = 0.0
        for ra, rb in zip(ta, tb):
            e = ra.u - rb.u
            worst = max(worst, math.sqrt(max(inner_H(sys, e, e), 0.0)))
        diffs.append(worst)
    table = monitor_bounds(sys, prob.graphs, runs)
    return {
        "eps_list": eps_list,
        "d": diffs,
        "monitors": table,
        "runs": runs,
    }
