"""Weighted mass functional and the scalar two-barrier constraint.

The constraint restricts the weighted mass of a coupled field to the
band [k_lo, k_hi].  Infinite barriers are accepted and recover the
unconstrained problem.  The multiplier conventions follow the normal
cone of the band: zero strictly inside, nonnegative at the upper
barrier, nonpositive at the lower one, unrestricted when the band is a
single point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import CoupledField, DiscreteSystem, inner_H

__all__ = [
    "ConstraintSpec",
    "make_constraint",
    "mass",
    "mass_tolerance",
    "multiplier_sign_ok",
    "variational_complementarity",
    "uniform_feasible_field",
]


@dataclass(frozen=True)
class ConstraintSpec:
    """Weights, barriers, and the cached total weight."""

    w: CoupledField
    k_lo: float
    k_hi: float
    sigma0: float

    @property
    def is_equality(self) -> bool:
        return self.k_lo == self.k_hi

    @property
    def unconstrained(self) -> bool:
        return math.isinf(self.k_lo) and math.isinf(self.k_hi)


def make_constraint(
    sys: DiscreteSystem, w: CoupledField, k_lo: float, k_hi: float
) -> ConstraintSpec:
    if np.any(w.bulk < 0.0) or np.any(w.bnd < 0.0):
        raise ValueError("weights must be nonnegative")
    if not k_lo <= k_hi:
        raise ValueError(f"barriers must satisfy k_lo <= k_hi, got {k_lo} > {k_hi}")
    ones = sys.field(np.ones(sys.n_bulk), np.ones(sys.n_bnd))
    sigma0 = inner_H(sys, w, ones)
    if sigma0 <= 0.0:
        raise ValueError("total weight must be positive (degenerate weights)")
    return ConstraintSpec(w=w, k_lo=float(k_lo), k_hi=float(k_hi), sigma0=sigma0)


def mass(sys: DiscreteSystem, c: ConstraintSpec, u: CoupledField) -> float:
    """Weighted mass of a field: the pairing of the weights with u."""
    return inner_H(sys, c.w, u)


def mass_tolerance(c: ConstraintSpec) -> float:
    """Absolute band used to decide constraint activity in floating point."""
    scale = 1.0
    for k in (c.k_lo, c.k_hi):
        if math.isfinite(k):
            scale = max(scale, abs(k))
    return 1e-10 * scale


def multiplier_sign_ok(
    c: ConstraintSpec, k: float, lam: float, tol: float | None = None
) -> bool:
    """Check the normal-cone sign condition for the multiplier at mass k."""
    if tol is None:
        tol = mass_tolerance(c)
    if k < c.k_lo - tol or k > c.k_hi + tol:
        raise ValueError(f"mass {k} violates the constraint band [{c.k_lo}, {c.k_hi}]")
    if c.is_equality:
        return True
    at_hi = math.isfinite(c.k_hi) and k >= c.k_hi - tol
    at_lo = math.isfinite(c.k_lo) and k <= c.k_lo + tol
    if at_hi and at_lo:
        return True
    if at_hi:
        return lam >= -tol
    if at_lo:
        return lam <= tol
    return abs(lam) <= tol


def variational_complementarity(
    sys: DiscreteSystem,
    c: ConstraintSpec,
    u: CoupledField,
    lam: float,
    probes: list[CoupledField],
    tol: float | None = None,
) -> bool:
    """Check lam * (w, u - z) >= -tol against every feasible probe z."""
    if tol is None:
        tol = mass_tolerance(c)
    ku = mass(sys, c, u)
    for z in probes:
        kz = mass(sys, c, z)
        if not (c.k_lo - tol <= kz <= c.k_hi + tol):
            raise ValueError("probe is not a member of the constraint set")
        if lam * (ku - kz) < -tol * (1.0 + abs(lam)):
            return False
    return True


def uniform_feasible_field(sys: DiscreteSystem, c: ConstraintSpec, k: float) -> CoupledField:
    """The constant field with weighted mass k (multiple of 1/sigma0)."""
    return sys.constant_field(k / c.sigma0)
