"""Nonlocal diffusion on perforated domains.

Discrete solvers for convolution-kernel diffusion problems with Dirichlet or
Neumann hole conditions, their homogenized limit equations, local (PDE)
reference solvers, and the experiment drivers comparing the two scales.
"""

from .grid import (
    Grid,
    GridMismatchError,
    ScalarField,
    field_from_function,
    inner_product,
    l2_norm,
    make_grid,
    restrict,
    zeros,
)
from .geometry import (
    DomainMask,
    GeometryError,
    HoleShape,
    Label,
    PerforationSpec,
    Regime,
    WeakLimit,
    analytic_weak_limit,
    build_annulus_mask,
    build_oscillating_mask,
    build_periodic_mask,
    example2_strips_spec,
    mask_from_text,
    mask_to_text,
    weak_pairing_error,
)
from .kernels import (
    KernelError,
    KernelSpec,
    Profile,
    RescaleMode,
    SampledKernel,
    SampleMode,
    ValidationReport,
    rescale,
    sample,
    second_moment_constant,
    unit_ball_volume,
    validate_kernel,
)
from .solvers import CGResult, EigenResult, SolverError, conjugate_gradient, smallest_eigenpair
from .nonlocal_op import (
    BoundaryCondition,
    CoveringCertificate,
    NonlocalOperator,
    NonlocalSolution,
    SpectralResult,
    chain_constants,
    covering_lower_bound,
)
from .homogenize import (
    CoefficientField,
    LimitKind,
    LimitProblem,
    LimitSolution,
    Role,
    SweepRecord,
    chi_field,
    epsilon_sweep,
    gamma_field,
    lambda_field,
    nu_field,
    solve_limit,
    test_function_battery,
)
from .localref import (
    CellGeometry,
    CellSolution,
    HoleBC,
    LocalProblem,
    LocalSolution,
    homogenized_coefficients,
    mu_constant,
    solve_local,
)
from .experiments import (
    CaseVerdict,
    CriticalSweepResult,
    RadiusRegime,
    VerdictGapError,
    delta_localization_sweep,
    iterated_limit_dirichlet,
    iterated_limit_neumann,
    nonlocal_critical_sweep,
)

__version__ = "0.1.0"
