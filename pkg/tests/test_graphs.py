"""Graph operations: frozen examples, sampled laws, growth checks."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acdyn.graphs import (
    GraphDomainError,
    GrowthConstants,
    Linear,
    Obstacle,
    PiecewiseLinear,
    PowerOdd,
    YosidaParams,
    check_growth,
    graph_from_config,
    minimal_section,
    moreau,
    resolvent,
    yosida,
)

CATALOG_PWL = PiecewiseLinear(
    vertices=((-1.0, -1.0), (-1.0, 0.0), (1.0, 0.0), (1.0, 1.0)),
    slope_left=1.0,
    slope_right=1.0,
)

GRAPHS = [
    Linear(0.0),
    Linear(1.0),
    PowerOdd(1.0, 3),
    PowerOdd(0.5, 5),
    Obstacle(-1.0, 1.0),
    CATALOG_PWL,
]

EPS_VALUES = [1.0, 0.5, 0.1, 0.01]


def kink_points(g, eps_eff: float) -> np.ndarray:
    """Abscissas where the smoothed map may lose differentiability."""
    if isinstance(g, Obstacle):
        return np.array([g.lo, g.hi])
    if isinstance(g, PiecewiseLinear):
        vx = np.array([v[0] for v in g.vertices])
        vy = np.array([v[1] for v in g.vertices])
        return vx + eps_eff * vy
    return np.array([])


class TestExamples:
    def test_resolvent(self):
        p = YosidaParams(eps=0.5)
        assert resolvent(Obstacle(-1, 1), p, 2.0) == pytest.approx(1.0, abs=1e-14)
        p1 = YosidaParams(eps=1.0)
        assert resolvent(Linear(1.0), p1, 1.0) == pytest.approx(0.5, abs=1e-14)
        assert resolvent(PowerOdd(1.0, 3), p1, 2.0) == pytest.approx(1.0, abs=1e-13)

    def test_yosida(self):
        p = YosidaParams(eps=0.5)
        assert yosida(Obstacle(-1, 1), p, 2.0) == pytest.approx(2.0, abs=1e-13)
        p1 = YosidaParams(eps=1.0)
        assert yosida(Linear(1.0), p1, 1.0) == pytest.approx(0.5, abs=1e-14)
        assert yosida(PowerOdd(1.0, 3), p1, 2.0) == pytest.approx(1.0, abs=1e-13)

    def test_moreau(self):
        p = YosidaParams(eps=0.5)
        for r in np.linspace(-1, 1, 9):
            assert moreau(Obstacle(-1, 1), p, float(r)) == 0.0
        assert moreau(Obstacle(-1, 1), p, 2.0) == pytest.approx(1.0, abs=1e-14)
        p1 = YosidaParams(eps=1.0)
        assert moreau(Linear(1.0), p1, 1.0) == pytest.approx(0.25, abs=1e-14)

    def test_minimal_section(self):
        assert minimal_section(PowerOdd(1.0, 3), 2.0) == pytest.approx(8.0)
        assert minimal_section(Obstacle(-1, 1), 0.3) == 0.0
        assert minimal_section(Obstacle(-1, 1), 1.0) == 0.0
        jump = PiecewiseLinear(vertices=((0.0, -1.0), (0.0, 2.0)))
        assert minimal_section(jump, 0.0) == 0.0
        with pytest.raises(GraphDomainError):
            minimal_section(Obstacle(-1, 1), 1.5)

    def test_boundary_scaling(self):
        # the boundary role rescales the effective parameter by rho
        g = Linear(1.0)
        p = YosidaParams(eps=0.5, rho=2.0, role="boundary")
        assert resolvent(g, p, 1.0) == pytest.approx(0.5)  # 1/(1 + 0.5*2)
        assert yosida(g, p, 1.0) == pytest.approx(0.5)

    def test_powerodd_resolvent_residual(self):
        g = PowerOdd(0.7, 5)
        p = YosidaParams(eps=0.3)
        rng = np.random.default_rng(0)
        r = rng.uniform(-50, 50, size=200)
        j = np.asarray(resolvent(g, p, r))
        res = j + p.eps_eff * 0.7 * j**5 - r
        assert np.max(np.abs(res)) <= 1e-13 * np.maximum(1.0, np.abs(r)).max()


@pytest.mark.parametrize("g", GRAPHS, ids=lambda g: type(g).__name__ + repr(getattr(g, "a", "")))
@pytest.mark.parametrize("eps", EPS_VALUES)
@pytest.mark.parametrize("role", ["bulk", "boundary"])
def test_sampled_laws(g, eps, role):
    p = YosidaParams(eps=eps, rho=0.7, role=role)
    grid = np.linspace(-3, 3, 201)
    j = np.asarray(resolvent(g, p, grid))
    y = np.asarray(yosida(g, p, grid))
    env = np.asarray(moreau(g, p, grid))
    prim = np.asarray(g.primitive(grid))

    # resolvent nonexpansive and yosida Lipschitz with 1/eps_eff
    dj = np.abs(np.diff(j))
    dr = np.diff(grid)
    assert np.all(dj <= dr + 1e-12)
    dy = np.abs(np.diff(y))
    assert np.all(dy <= dr / p.eps_eff + 1e-9)

    # monotone, zero at zero
    assert np.all(np.diff(y) >= -1e-12)
    assert abs(float(yosida(g, p, 0.0))) <= 1e-14

    # envelope bounds and the squared-map bound
    assert np.all(env >= -1e-15)
    assert np.all(env <= prim + 1e-12)
    assert np.all(y**2 <= (2.0 / p.eps_eff) * env + 1e-10)

    # smoothed map bounded by the minimal section on the domain
    for r in grid:
        try:
            m = minimal_section(g, float(r))
        except GraphDomainError:
            continue
        yr = float(yosida(g, p, float(r)))
        assert abs(yr) <= abs(m) + 1e-12


@pytest.mark.parametrize("g", GRAPHS, ids=lambda g: type(g).__name__ + repr(getattr(g, "a", "")))
@pytest.mark.parametrize("eps", EPS_VALUES)
def test_envelope_derivative_matches_map(g, eps):
    # central differences at h=1e-5, away from kinks of the smoothed map
    p = YosidaParams(eps=eps)
    h = 1e-5
    grid = np.linspace(-3, 3, 201)
    kinks = kink_points(g, p.eps_eff)
    if kinks.size:
        keep = np.min(np.abs(grid[:, None] - kinks[None, :]), axis=1) > 0.02
        grid = grid[keep]
    fd = (np.asarray(moreau(g, p, grid + h)) - np.asarray(moreau(g, p, grid - h))) / (2 * h)
    y = np.asarray(yosida(g, p, grid))
    tol = 100.0 * h**2 / p.eps_eff + 1e-9
    assert np.max(np.abs(fd - y)) <= tol


@pytest.mark.parametrize("g", GRAPHS, ids=lambda g: type(g).__name__ + repr(getattr(g, "a", "")))
def test_origin_and_section_monotonicity(g):
    # the graph passes through the origin with a vanishing primitive
    lo0, hi0 = g.section_bounds(0.0)
    assert lo0 <= 0.0 <= hi0
    assert float(np.asarray(g.primitive(0.0))) == 0.0
    assert np.all(np.asarray(g.primitive(np.linspace(-0.9, 0.9, 31))) >= 0.0)
    # every value at r stays below every value at s > r
    samples = np.linspace(-0.95, 0.95, 41)
    for r, s in zip(samples[:-1], samples[1:]):
        _, hi_r = g.section_bounds(float(r))
        lo_s, _ = g.section_bounds(float(s))
        assert hi_r <= lo_s + 1e-12


def test_envelope_grows_as_eps_shrinks():
    grid = np.linspace(-3, 3, 201)
    for g in GRAPHS:
        prev = None
        for eps in [1.0, 0.5, 0.1, 0.01]:  # decreasing
            env = np.asarray(moreau(g, YosidaParams(eps=eps), grid))
            if prev is not None:
                assert np.all(env >= prev - 1e-12)
            prev = env


@settings(max_examples=200, deadline=None)
@given(
    r=st.floats(-3, 3),
    s=st.floats(-3, 3),
    eps=st.sampled_from(EPS_VALUES),
    gi=st.integers(0, len(GRAPHS) - 1),
)
def test_nonexpansive_and_lipschitz_pairs(r, s, eps, gi):
    g = GRAPHS[gi]
    p = YosidaParams(eps=eps)
    jr, js = float(resolvent(g, p, r)), float(resolvent(g, p, s))
    assert abs(jr - js) <= abs(r - s) + 1e-12
    yr, ys = float(yosida(g, p, r)), float(yosida(g, p, s))
    assert abs(yr - ys) <= abs(r - s) / p.eps_eff + 1e-9
    if (r - s) != 0:
        assert (yr - ys) * (r - s) >= -1e-12


@settings(max_examples=150, deadline=None)
@given(r=st.floats(-3, 3), eps=st.sampled_from(EPS_VALUES), gi=st.integers(0, len(GRAPHS) - 1))
def test_envelope_bounds_pointwise(r, eps, gi):
    g = GRAPHS[gi]
    p = YosidaParams(eps=eps)
    env = float(moreau(g, p, r))
    assert env >= -1e-15
    assert env <= float(np.asarray(g.primitive(r))) + 1e-12
    y = float(yosida(g, p, r))
    assert y * y <= 2.0 / p.eps_eff * env + 1e-10


class TestGrowth:
    def test_prototype_passes(self):
        g = PowerOdd(1.0, 3)
        grid = np.linspace(-3, 3, 201)
        report = check_growth(g, g, GrowthConstants(c0=4.0, rho=1.0), grid)
        assert report.all_passed
        # direct-evaluation oracle for the worst bulk ratio
        oracle = float(np.max(np.abs(grid**3) / (4.0 * (1.0 + grid**4 / 4.0))))
        assert report.conditions["minimal_growth_bulk"].worst_ratio == pytest.approx(oracle)
        assert oracle < 1.0

    def test_obstacle_boundary_fails_comparison(self):
        grid = np.linspace(-3, 3, 201)
        report = check_growth(
            Linear(1.0), Obstacle(-1.0, 1.0), GrowthConstants(c0=1.0, rho=1.0), grid
        )
        assert not report.all_passed
        assert report.domain_violations["minimal_bulk_vs_bnd"]
        assert not report.conditions["minimal_bulk_vs_bnd"].passed

    def test_zero_graphs_pass(self):
        grid = np.linspace(-3, 3, 201)
        report = check_growth(
            Linear(0.0), Linear(0.0), GrowthConstants(c0=1.0, rho=1.0), grid
        )
        assert report.all_passed
        for cond in report.conditions.values():
            assert cond.worst_ratio <= 1e-15

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            check_growth(Linear(0.0), Linear(0.0), GrowthConstants(1.0, 1.0), [])


class TestConfig:
    def test_roundtrip_kinds(self):
        for cfg, cls in [
            ({"kind": "zero"}, Linear),
            ({"kind": "linear", "slope": 2.0}, Linear),
            ({"kind": "power_odd", "coefficient": 1.0, "exponent": 3}, PowerOdd),
            ({"kind": "obstacle", "lo": -1.0, "hi": 1.0}, Obstacle),
            (
                {"kind": "piecewise_linear", "vertices": [[-1, -1], [-1, 0], [1, 0], [1, 1]],
                 "slope_left": 1.0, "slope_right": 1.0},
                PiecewiseLinear,
            ),
        ]:
            assert isinstance(graph_from_config(cfg), cls)

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            Linear(-1.0)
        with pytest.raises(ValueError):
            PowerOdd(1.0, 2)
        with pytest.raises(ValueError):
            Obstacle(0.5, 1.0)
        with pytest.raises(ValueError):
            PiecewiseLinear(vertices=((1.0, 0.0), (0.0, 1.0)))
        with pytest.raises(ValueError):
            PiecewiseLinear(vertices=((1.0, 1.0), (2.0, 2.0)))  # misses the origin
        with pytest.raises(ValueError):
            YosidaParams(eps=0.0)
        with pytest.raises(ValueError):
            YosidaParams(eps=2.0)
