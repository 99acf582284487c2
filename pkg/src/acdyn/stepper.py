"""Implicit proximal time stepping with an active-set scalar multiplier.

Each step solves, in the coupled weak form and jointly for the bulk and
boundary unknowns (trace identified),

    (u - u_prev)/tau + A u + beta_eps(u) + eps*u + pi(u_prev) + lam*w = f,

which is the optimality system of the strictly convex proximal problem
over the mass band.  The Lipschitz perturbation pi is evaluated at the
previous state in both solver modes; this keeps every step an exact
convex minimization.  The multiplier is found by an active-set loop:
first the step is tried with lam = 0, and if the mass leaves the band
the violated barrier is pinned and the scalar equation
mass(u(lam)) = k_bar is solved by safeguarded Newton/bisection; the map
lam -> mass(u(lam)) is strictly decreasing, so the root is unique.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import graphs as gr
from .constraint import ConstraintSpec, mass, mass_tolerance, multiplier_sign_ok
from .mesh import CoupledField, DiscreteSystem, inner_H

__all__ = [
    "StepError",
    "InfeasibleDataError",
    "PerturbationSpec",
    "SolverConfig",
    "StepRecord",
    "StepOperator",
    "proximal_step",
    "lambda_formula",
    "simulate",
    "run",
]


class StepError(RuntimeError):
    """Inner Newton or outer multiplier solve failed."""


class InfeasibleDataError(ValueError):
    """Initial data violates the compatibility requirements."""


# ---------------------------------------------------------------------------
# perturbations


def _pert_eval(kind: str, params: dict, r: np.ndarray) -> np.ndarray:
    if kind == "zero":
        return np.zeros_like(r)
    if kind == "linear":
        return params["c"] * r
    if kind == "negate":
        return -r
    if kind == "sine":
        return params["amplitude"] * np.sin(params["frequency"] * r)
    raise ValueError(f"unknown perturbation kind {kind!r}")


@dataclass(frozen=True)
class PerturbationSpec:
    """Lipschitz perturbations applied in the bulk and on the boundary."""

    bulk_kind: str = "zero"
    bnd_kind: str = "zero"
    bulk_params: dict = field(default_factory=dict)
    bnd_params: dict = field(default_factory=dict)
    lipschitz_bulk: float = 0.0
    lipschitz_bnd: float = 0.0

    def eval_bulk(self, r: np.ndarray) -> np.ndarray:
        return _pert_eval(self.bulk_kind, self.bulk_params, np.asarray(r, dtype=float))

    def eval_bnd(self, r: np.ndarray) -> np.ndarray:
        return _pert_eval(self.bnd_kind, self.bnd_params, np.asarray(r, dtype=float))

    def lipschitz_violations(self, lo: float = -5.0, hi: float = 5.0, n: int = 1001):
        """Sampled check that the declared constants bound the slopes."""
        grid = np.linspace(lo, hi, n)
        out = []
        for name, f, lip in (
            ("bulk", self.eval_bulk, self.lipschitz_bulk),
            ("bnd", self.eval_bnd, self.lipschitz_bnd),
        ):
            vals = f(grid)
            slopes = np.abs(np.diff(vals) / np.diff(grid))
            worst = float(slopes.max()) if slopes.size else 0.0
            if worst > lip * (1.0 + 1e-9) + 1e-12:
                out.append((name, worst, lip))
        return out


ZERO_PERTURBATION = PerturbationSpec()


@dataclass(frozen=True)
class SolverConfig:
    tau: float
    T: float
    eps: float
    rho: float = 1.0
    newton_tol: float = 1e-11
    newton_max_iter: int = 60
    lambda_tol: float = 1e-11
    lambda_max_iter: int = 200
    mode: str = "semi_implicit"

    def __post_init__(self) -> None:
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if not 0.0 < self.eps <= 1.0:
            raise ValueError("eps must lie in (0, 1]")
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")
        if self.newton_tol <= 0.0 or self.lambda_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.mode not in ("semi_implicit", "fully_variational"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class StepRecord:
    """State and diagnostics after one accepted step."""

    t: float
    u: CoupledField
    lam: float
    xi: CoupledField
    k: float
    energy: float
    residual_bulk: float
    residual_bnd: float
    lambda_iterates: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# step operator


class StepOperator:
    """Assembled operators and solvers for one time-step configuration.

    Reused across the steps of a run; all mutable state is local to each
    call except a cached factorization of the last Jacobian, used for
    the outer scalar derivative.
    """

    def __init__(
        self,
        sys: DiscreteSystem,
        gp: gr.GraphPair,
        cons: ConstraintSpec,
        pert: PerturbationSpec,
        cfg: SolverConfig,
    ) -> None:
        self.sys = sys
        self.gp = gp
        self.cons = cons
        self.pert = pert
        self.cfg = cfg
        self.p_bulk = gr.YosidaParams(cfg.eps, cfg.rho, "bulk")
        self.p_bnd = gr.YosidaParams(cfg.eps, cfg.rho, "boundary")

        n, nb = sys.n_bulk, sys.n_bnd
        self.bidx = sys.bidx
        interior = np.ones(n, dtype=bool)
        interior[self.bidx] = False
        self.interior = interior
        self.P = sp.csr_matrix(
            (np.ones(nb), (self.bidx, np.arange(nb))), shape=(n, nb)
        )
        tau, eps = cfg.tau, cfg.eps
        Mb, Mg = sys.M_bulk, sys.M_bnd
        self.K0 = (
            sp.diags((1.0 / tau + eps) * Mb)
            + sys.A_bulk
            + self.P @ (sp.diags((1.0 / tau + eps) * Mg) + sys.A_bnd) @ self.P.T
        ).tocsr()
        self.wvec = Mb * cons.w.bulk + self._scatter(Mg * cons.w.bnd)
        scale = Mb.copy()
        scale[self.bidx] += Mg
        self.scale = scale
        self._last_factor = None

    # -- small helpers ------------------------------------------------------

    def _scatter(self, vec_bnd: np.ndarray) -> np.ndarray:
        out = np.zeros(self.sys.n_bulk)
        out[self.bidx] += vec_bnd
        return out

    def constant_part(self, u_prev: CoupledField, f_now: CoupledField) -> np.ndarray:
        sys, tau = self.sys, self.cfg.tau
        pb = self.pert.eval_bulk(u_prev.bulk)
        pg = self.pert.eval_bnd(u_prev.bnd)
        b = sys.M_bulk * (pb - f_now.bulk - u_prev.bulk / tau)
        b += self._scatter(sys.M_bnd * (pg - f_now.bnd - u_prev.bnd / tau))
        return b

    def residual(self, u: np.ndarray, lam: float, b_const: np.ndarray) -> np.ndarray:
        sys, cfg = self.sys, self.cfg
        ug = u[self.bidx]
        core = (1.0 / cfg.tau + cfg.eps) * (sys.M_bulk * u) + sys.A_bulk @ u
        core += sys.M_bulk * np.asarray(gr.yosida(self.gp.bulk, self.p_bulk, u))
        bnd = (1.0 / cfg.tau + cfg.eps) * (sys.M_bnd * ug) + sys.A_bnd @ ug
        bnd += sys.M_bnd * np.asarray(gr.yosida(self.gp.bnd, self.p_bnd, ug))
        return core + self._scatter(bnd) + b_const + lam * self.wvec

    def jacobian(self, u: np.ndarray) -> sp.csr_matrix:
        sys = self.sys
        ug = u[self.bidx]
        db = np.asarray(gr.yosida_slope(self.gp.bulk, self.p_bulk, u))
        dg = np.asarray(gr.yosida_slope(self.gp.bnd, self.p_bnd, ug))
        return (
            self.K0
            + sp.diags(sys.M_bulk * db)
            + self.P @ sp.diags(sys.M_bnd * dg) @ self.P.T
        ).tocsr()

    def scaled_norm(self, g: np.ndarray) -> float:
        return float(np.max(np.abs(g) / self.scale))

    def phi_eps(self, u: CoupledField) -> float:
        """Value of the regularized convex energy at u."""
        sys, eps = self.sys, self.cfg.eps
        env_b = np.asarray(gr.moreau(self.gp.bulk, self.p_bulk, u.bulk))
        env_g = np.asarray(gr.moreau(self.gp.bnd, self.p_bnd, u.bnd))
        return float(
            0.5 * u.bulk @ (sys.A_bulk @ u.bulk)
            + np.dot(sys.M_bulk, env_b)
            + 0.5 * eps * np.dot(sys.M_bulk, u.bulk**2)
            + 0.5 * u.bnd @ (sys.A_bnd @ u.bnd)
            + np.dot(sys.M_bnd, env_g)
            + 0.5 * eps * np.dot(sys.M_bnd, u.bnd**2)
        )

    def proximal_objective(
        self, u: CoupledField, u_prev: CoupledField, f_now: CoupledField, lam: float
    ) -> float:
        sys, tau = self.sys, self.cfg.tau
        pb = self.pert.eval_bulk(u_prev.bulk)
        pg = self.pert.eval_bnd(u_prev.bnd)
        diff = u - u_prev
        quad = 0.5 / tau * inner_H(sys, diff, diff)
        lin = np.dot(sys.M_bulk * (pb - f_now.bulk), u.bulk)
        lin += np.dot(sys.M_bnd * (pg - f_now.bnd), u.bnd)
        lin += lam * (
            np.dot(sys.M_bulk * self.cons.w.bulk, u.bulk)
            + np.dot(sys.M_bnd * self.cons.w.bnd, u.bnd)
        )
        return self.phi_eps(u) + quad + float(lin)

    # -- inner Newton solve -------------------------------------------------

    def solve_fixed_lambda(
        self, lam: float, b_const: np.ndarray, u_start: np.ndarray
    ) -> np.ndarray:
        cfg = self.cfg
        u = u_start.copy()
        g = self.residual(u, lam, b_const)
        r = self.scaled_norm(g)
        for _ in range(cfg.newton_max_iter):
            if r <= cfg.newton_tol:
                self._last_factor = splu(self.jacobian(u).tocsc())
                return u
            jac = self.jacobian(u)
            factor = splu(jac.tocsc())
            self._last_factor = factor
            d = -factor.solve(g)
            # increment below representable improvement: at the roundoff floor
            if np.max(np.abs(d)) <= 1e-14 * (1.0 + np.max(np.abs(u))):
                return u
            alpha = 1.0
            for _ in range(40):
                u_try = u + alpha * d
                g_try = self.residual(u_try, lam, b_const)
                r_try = self.scaled_norm(g_try)
                if r_try < r:
                    break
                alpha *= 0.5
            else:
                raise StepError("inner Newton line search failed")
            u, g, r = u_try, g_try, r_try
        if r <= cfg.newton_tol:
            self._last_factor = splu(self.jacobian(u).tocsc())
            return u
        raise StepError(f"inner Newton did not converge (residual {r:.3e})")

    def mass_of(self, u: np.ndarray) -> float:
        return float(np.dot(self.wvec, u))

    def mass_slope(self) -> float:
        """Derivative of mass(u(lam)) at the last inner solution."""
        z = self._last_factor.solve(self.wvec)
        return -float(np.dot(self.wvec, z))

    # -- full step ----------------------------------------------------------

    def step(self, u_prev: CoupledField, f_now: CoupledField, t: float) -> StepRecord:
        cfg, cons = self.cfg, self.cons
        if not self.sys.check_trace(u_prev):
            raise StepError("previous state is not trace consistent")
        b_const = self.constant_part(u_prev, f_now)
        tol_k = mass_tolerance(cons)
        iterates: list[tuple[float, float]] = []

        def solve_at(lam: float, u0: np.ndarray) -> tuple[np.ndarray, float]:
            u = self.solve_fixed_lambda(lam, b_const, u0)
            m = self.mass_of(u)
            iterates.append((lam, m))
            return u, m

        if cons.is_equality:
            lam, u = self._scalar_solve(cons.k_lo, b_const, u_prev.bulk, solve_at)
        else:
            u, m = solve_at(0.0, u_prev.bulk)
            if cons.k_lo - tol_k <= m <= cons.k_hi + tol_k:
                lam = 0.0
            else:
                k_bar = cons.k_hi if m > cons.k_hi else cons.k_lo
                lam, u = self._scalar_solve(k_bar, b_const, u, solve_at, warm=(0.0, m))

        fld = self.sys.field_from_bulk(u)
        rec = self._make_record(fld, u_prev, f_now, lam, t, b_const, iterates)
        k_clamped = min(max(rec.k, cons.k_lo), cons.k_hi)
        if abs(rec.k - k_clamped) > tol_k:
            raise StepError(f"step left the mass band: k={rec.k}")
        if not multiplier_sign_ok(cons, rec.k, rec.lam, tol=tol_k):
            raise StepError("multiplier sign condition failed at the step")
        if cfg.mode == "fully_variational":
            obj_new = self.proximal_objective(fld, u_prev, f_now, 0.0)
            obj_old = self.proximal_objective(u_prev, u_prev, f_now, 0.0)
            if obj_new > obj_old + 1e-9 * (1.0 + abs(obj_old)):
                raise StepError("proximal objective increased across the step")
        return rec

    def _scalar_solve(
        self,
        k_bar: float,
        b_const: np.ndarray,
        u0: np.ndarray,
        solve_at: Callable,
        warm: tuple[float, float] | None = None,
    ) -> tuple[float, np.ndarray]:
        """Find lam with mass(u(lam)) = k_bar; mass is decreasing in lam."""
        cfg = self.cfg
        atol = cfg.lambda_tol * max(1.0, abs(k_bar))
        if warm is None:
            u, m = solve_at(0.0, u0)
        else:
            _, m0 = warm
            u, m = u0, m0
        lam = 0.0
        if abs(m - k_bar) <= atol:
            return lam, u

        # bracket the root: [lo, hi] with mass(lo) > k_bar > mass(hi)
        seed = self._bracket_seed(b_const)
        if m > k_bar:
            lo, m_lo = lam, m
            hi = seed
            u_hi, m_hi = solve_at(hi, u)
            for _ in range(80):
                if m_hi < k_bar:
                    break
                lo, m_lo = hi, m_hi
                hi *= 2.0
                u_hi, m_hi = solve_at(hi, u_hi)
            else:
                raise StepError("multiplier bracket expansion failed")
            u = u_hi
            if abs(m_hi - k_bar) <= atol:
                return hi, u
            lam, m = hi, m_hi
        else:
            hi, m_hi = lam, m
            lo = -seed
            u_lo, m_lo = solve_at(lo, u)
            for _ in range(80):
                if m_lo > k_bar:
                    break
                hi, m_hi = lo, m_lo
                lo *= 2.0
                u_lo, m_lo = solve_at(lo, u_lo)
            else:
                raise StepError("multiplier bracket expansion failed")
            u = u_lo
            if abs(m_lo - k_bar) <= atol:
                return lo, u
            lam, m = lo, m_lo

        for _ in range(cfg.lambda_max_iter):
            slope = self.mass_slope()
            lam_new = lam - (m - k_bar) / slope if slope < 0.0 else None
            if lam_new is None or not (lo < lam_new < hi):
                lam_new = 0.5 * (lo + hi)
            u, m = solve_at(lam_new, u)
            lam = lam_new
            if abs(m - k_bar) <= atol:
                return lam, u
            if m > k_bar:
                lo = lam
            else:
                hi = lam
        raise StepError("multiplier iteration did not converge")

    def _bracket_seed(self, b_const: np.ndarray) -> float:
        denom = inner_H(self.sys, self.cons.w, self.cons.w)
        scale = float(np.max(np.abs(b_const) / self.scale)) + 1.0
        return scale * self.cons.sigma0 / max(denom, 1e-300)

    def _make_record(
        self,
        u: CoupledField,
        u_prev: CoupledField,
        f_now: CoupledField,
        lam: float,
        t: float,
        b_const: np.ndarray,
        iterates: list,
    ) -> StepRecord:
        sys = self.sys
        g = self.residual(u.bulk, lam, b_const)
        res_bulk = float(np.max(np.abs(g[self.interior]) / sys.M_bulk[self.interior]))
        res_bnd = float(np.max(np.abs(g[self.bidx]) / sys.M_bnd))
        xi = CoupledField(
            np.asarray(gr.yosida(self.gp.bulk, self.p_bulk, u.bulk)),
            np.asarray(gr.yosida(self.gp.bnd, self.p_bnd, u.bnd)),
            trace_consistent=False,
        )
        return StepRecord(
            t=t,
            u=u,
            lam=lam,
            xi=xi,
            k=mass(sys, self.cons, u),
            energy=self.phi_eps(u),
            residual_bulk=res_bulk,
            residual_bnd=res_bnd,
            lambda_iterates=iterates,
        )


# ---------------------------------------------------------------------------
# public operations


def proximal_step(
    sys: DiscreteSystem,
    gp: gr.GraphPair,
    cons: ConstraintSpec,
    pert: PerturbationSpec,
    cfg: SolverConfig,
    u_prev: CoupledField,
    f_now: CoupledField,
    t: float = 0.0,
) -> StepRecord:
    """Advance one implicit step from u_prev under the data f_now."""
    return StepOperator(sys, gp, cons, pert, cfg).step(u_prev, f_now, t)


def lambda_formula(
    sys: DiscreteSystem,
    gp: gr.GraphPair,
    cons: ConstraintSpec,
    pert: PerturbationSpec,
    cfg: SolverConfig,
    rec: StepRecord,
    u_prev: CoupledField,
    f_now: CoupledField,
) -> float:
    """Recover the multiplier by pairing the step equation with constants.

    The gradient terms vanish against constants (both stiffness kernels
    contain them), leaving the weighted average of the remaining terms
    divided by the total weight.
    """
    p_bulk = gr.YosidaParams(cfg.eps, cfg.rho, "bulk")
    p_bnd = gr.YosidaParams(cfg.eps, cfg.rho, "boundary")
    u = rec.u
    du_b = (u.bulk - u_prev.bulk) / cfg.tau
    du_g = (u.bnd - u_prev.bnd) / cfg.tau
    xi_b = np.asarray(gr.yosida(gp.bulk, p_bulk, u.bulk))
    xi_g = np.asarray(gr.yosida(gp.bnd, p_bnd, u.bnd))
    res_b = f_now.bulk - du_b - pert.eval_bulk(u_prev.bulk) - xi_b - cfg.eps * u.bulk
    res_g = f_now.bnd - du_g - pert.eval_bnd(u_prev.bnd) - xi_g - cfg.eps * u.bnd
    total = float(np.dot(sys.M_bulk, res_b) + np.dot(sys.M_bnd, res_g))
    return total / cons.sigma0


def simulate(
    sys: DiscreteSystem,
    gp: gr.GraphPair,
    cons: ConstraintSpec,
    pert: PerturbationSpec,
    cfg: SolverConfig,
    u0: CoupledField,
    f_of_t: Callable[[float], CoupledField],
) -> list[StepRecord]:
    """Run the flow from u0 and return one record per time level.

    The initial data must satisfy the compatibility requirements: its
    mass lies in the barrier band and both primitives are integrable
    (finite at every node value).
    """
    tol_k = mass_tolerance(cons)
    k0 = mass(sys, cons, u0)
    if not (cons.k_lo - tol_k <= k0 <= cons.k_hi + tol_k):
        raise InfeasibleDataError(
            f"initial mass {k0} violates the band [{cons.k_lo}, {cons.k_hi}]"
        )
    if not np.all(np.isfinite(np.asarray(gp.bulk.primitive(u0.bulk)))):
        raise InfeasibleDataError("bulk primitive is not finite at the initial state")
    if not np.all(np.isfinite(np.asarray(gp.bnd.primitive(u0.bnd)))):
        raise InfeasibleDataError("boundary primitive is not finite at the initial state")
    if not sys.check_trace(u0):
        raise InfeasibleDataError("initial state is not trace consistent")

    op = StepOperator(sys, gp, cons, pert, cfg)
    p_bulk = gr.YosidaParams(cfg.eps, cfg.rho, "bulk")
    p_bnd = gr.YosidaParams(cfg.eps, cfg.rho, "boundary")
    xi0 = CoupledField(
        np.asarray(gr.yosida(gp.bulk, p_bulk, u0.bulk)),
        np.asarray(gr.yosida(gp.bnd, p_bnd, u0.bnd)),
        trace_consistent=False,
    )
    records = [
        StepRecord(
            t=0.0,
            u=u0.copy(),
            lam=0.0,
            xi=xi0,
            k=k0,
            energy=op.phi_eps(u0),
            residual_bulk=0.0,
            residual_bnd=0.0,
        )
    ]
    n_steps = int(round(cfg.T / cfg.tau))
    u = u0
    for m in range(1, n_steps + 1):
        t = m * cfg.tau
        rec = op.step(u, f_of_t(t), t)
        records.append(rec)
        u = rec.u
    return records


def run(scenario) -> list[StepRecord]:
    """Run a validated scenario end to end."""
    from .scenario import build_problem

    prob = build_problem(scenario)
    return simulate(
        prob.sys, prob.graphs, prob.constraint, prob.perturbation, prob.solver,
        prob.u0, prob.f_of_t,
    )
