"""Representative functions, null-minimization and Gamma-tests for monotone flows."""

__version__ = "0.1.0"

from .convex import (  # noqa: E402
    AbsPower,
    ExtConvexFn,
    GridConvexFn,
    HalfNormSq,
    Indicator,
    PiecewiseQuadratic1D,
    Quadratic,
    Support,
    Zero,
)
from .exceptions import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DimensionError,
    FitzflowError,
    ImproperFunctionError,
    NonConvexError,
    NotMaximalError,
    OutsideDomainError,
)
from .flows import (  # noqa: E402
    FlowProblem,
    OptimizerConfig,
    Source,
    TimeGrid,
    Trajectory,
    ben_functional,
    ben_weighted_functional,
    dne1_functional,
    dne2_functional,
    relative_l2,
    solve_null_min,
    solve_reference,
    stopping_time,
    weighted_pairing,
)
from .gamma import (  # noqa: E402
    FnSequence,
    dne_stability_experiment,
    evolutionary_gamma_check,
    gamma_check_static,
    stability_experiment,
)
from .operators import Identity, LinearSPD, PLaplacian1D, Sign1D, Subdifferential  # noqa: E402
from .representatives import (  # noqa: E402
    Fb,
    FenchelOfPotential,
    FitzIdentity,
    FitzpatrickOfGraph,
    band_check,
    default_rep,
    inf_convolution,
    represents_check,
)
