"""Periodic pseudo-spectral lab for transport equations with rough coefficients."""

__version__ = "0.1.0"

from .commutators import (
    CommutatorReport,
    commutator_C,
    commutator_C_taylor,
    commutator_D,
    convergence_study,
)
from .duality import (
    BoundReport,
    DualityReport,
    ExponentPair,
    duality_pairing,
    euler_zero_experiment,
    max_principle_check,
    serrin_exponents,
    vorticity_l1_check,
    weak_residual,
)
from .errors import CFLViolation, ConfigError, SolverAbort
from .grid import Field, Grid, make_grid
from .mollify import (
    MollifierKernel,
    RoughFieldSpec,
    make_kernel,
    mollification_error,
    mollify,
    synth_rough_field,
)
from .sobolev import SobolevEstimate, estimate_sobolev_constant
from .solvers import (
    AdjointProblem,
    StepperConfig,
    Trajectory,
    TransportProblem,
    curl_inverse,
    solve_adjoint,
    solve_ns_vorticity,
    solve_transport,
)
from .spectral import (
    NormReport,
    curl,
    divergence,
    gradient,
    lebesgue_norm,
    leray_project,
    sobolev_seminorm,
    tensor_divergence,
)
