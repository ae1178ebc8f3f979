"""Numerical laboratory for heat-equation solutions with a moving point source.

The package builds solutions of u_t - Laplace(u) = delta(x - xi(t)), measures
their mass on shrinking balls around the singular point, and verifies the
scaling laws that relate those masses to the first exit time and occupation
time of the rebased trajectory.
"""

from .errors import (
    AlphaOutOfRangeError,
    AtSingularPointError,
    ConfigError,
    DegenerateWindowError,
    EnsembleTooSmallError,
    GridMismatchError,
    GridTooCoarseError,
    HeatSingError,
    NegativeEigenvalueError,
    NonpositiveMassError,
    NonpositiveTimeError,
    OutOfDomainError,
    ToleranceNotMetError,
    UnsupportedInitialDataError,
)
from .fbm import (
    FgnSpec,
    SamplePath,
    derive_seed,
    fgn_autocovariance,
    generate_fbm_path,
    generate_fgn,
)
from .functionals import (
    ExitOccupationCurve,
    RadiusGrid,
    exit_occupation_curve,
    first_exit_time,
    occupation_time,
    tail_integral,
)
from .heatmass import (
    BallMassCurve,
    BumpTestFunction,
    ConstantData,
    GaussianBumpData,
    HeatKernelParams,
    QuadratureConfig,
    background_mass,
    gaussian_ball_mass,
    heat_kernel,
    mass_upper_split,
    singular_mass,
    source_density,
    total_mass_curve,
    unit_ball_volume,
    weak_form_scale,
    weak_residual,
)
from .paths import (
    ConstantTrajectory,
    HolderTrajectory,
    RebasedIncrement,
    SampledTrajectory,
    Trajectory,
    rebase,
)
from .scaling import (
    BoundReport,
    ExponentFit,
    MomentEstimate,
    Removability,
    classify_removability,
    fit_exponent,
    moment_estimate,
    occupation_moment_profile,
    verify_lower_bound,
    verify_upper_bound,
)

__version__ = "0.1.0"
