"""fracsem: the fractional Laplacian (−Δ)^s on R^n and on periodic boxes, its heat-semigroup
representations, the extension problem, and Hölder–Zygmund regularity."""
from .errors import (
    ConfigError,
    ConvergenceError,
    DivergenceError,
    DomainError,
    ExtrapolationError,
    FieldFormatError,
    FitResidualError,
    FracsemError,
    FracsemWarning,
    PoleError,
    RemainderTooLargeError,
    TailBoundError,
    ZeroMeanViolation,
)
from .extension import extend, extend_neumann, neumann_limit, quotient_limit
from .fields import AnalyticField, GridField, load_field, make_fixture, sample, save_field
from .heat import gauss_weierstrass, heat_apply, heat_apply_analytic
from .numerics import FracOrder, QuadratureSpec, c_n_negs, c_ns, gamma, integrate_mellin
from .operator import (
    frac_apply_pointwise,
    frac_apply_semigroup,
    frac_apply_spectral,
    frac_inverse_semigroup,
    riesz_convolve,
    riesz_kernel,
)
from .regularity import estimate_alpha, lambda_seminorm, verify_mapping, zygmund_seminorm

__version__ = "0.1.0"
