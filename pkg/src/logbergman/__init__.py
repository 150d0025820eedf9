"""Logarithmic Bergman kernels and conditional zero statistics on CP^N."""

from .exceptions import (
    DegenerateSectionError,
    DimensionMismatchError,
    DomainError,
    EnsembleError,
    InvalidPointError,
    LogBergmanError,
    NotOnSubvarietyError,
    OracleFailureError,
    RangeError,
    RankDeficientError,
)
from .geometry import (
    AdaptedFrame,
    AffineChartPoint,
    LinearSubvariety,
    ProjectivePoint,
    adapted_frame,
    distance_to_subvariety,
    fs_distance,
    point_at_distance,
)
from .kernels import (
    LogMagnitude,
    beta_bound,
    dim_sections,
    normalized_kernel,
    q_offdiag,
    ratio_rho,
    remainder_Rk,
    rho_k,
    rho_kV,
    sandwich_check,
)
from .sections import (
    MonomialBasis,
    build_basis,
    extension_norm,
    gram_oracle_basis,
    restriction_operator,
    split_by_subvariety,
)

__version__ = "0.1.0"
