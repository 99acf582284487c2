"""Constrained phase-field flow with coupled boundary dynamics.

Solver and verification toolkit for a bulk/boundary reaction-diffusion
flow whose nonlinearity is a maximal monotone graph plus a Lipschitz
perturbation, evolving under a weighted mass constraint enforced by a
scalar multiplier.
"""

from .constraint import (
    ConstraintSpec,
    make_constraint,
    mass,
    multiplier_sign_ok,
    variational_complementarity,
)
from .density import DensityRun, density_study, robin_approx
from .diagnostics import (
    EnergyBreakdown,
    continuous_dependence,
    energy,
    eps_sweep,
    monitor_bounds,
)
from .graphs import (
    GraphPair,
    GrowthConstants,
    Linear,
    MonotoneGraph,
    Obstacle,
    PiecewiseLinear,
    PowerOdd,
    YosidaParams,
    check_growth,
    minimal_section,
    moreau,
    resolvent,
    yosida,
)
from .mesh import (
    CoupledField,
    DiscreteSystem,
    Domain,
    assemble,
    build_domain,
    inner_H,
    normal_flux,
)
from .scenario import Problem, Scenario, build_problem, validate
from .stepper import (
    PerturbationSpec,
    SolverConfig,
    StepRecord,
    lambda_formula,
    proximal_step,
    run,
    simulate,
)

__version__ = "0.1.0"
