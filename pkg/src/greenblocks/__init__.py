"""Fundamental solutions and Green's functions of block lower-triangular matrices."""

__version__ = "0.1.0"

from .blockmat import (
    BlockLowerTriangular,
    BlockPartition,
    CausalSpectrum,
    assemble,
    causal_inverse,
    causal_spectrum,
    load_matrix,
    save_matrix,
)
from .chaincalc import Chain, block_function, block_resolvent, enumerate_chains
from .divdiff import (
    PiecewiseExpKernel,
    dd_contour,
    dd_distinct,
    dd_exp_conv,
    dd_recurrence,
    kernel_value,
    laplace_check,
)
from .errors import (
    BlockStructureError,
    ContourError,
    GreenBlocksError,
    ParseError,
    SingularBlockError,
    SpectrumOnAxisError,
    UndefinedAtZeroError,
)
from .greensolve import (
    ForcingFunction,
    GreenSample,
    TimeGrid,
    exp_blocks,
    green_blocks,
    solve_bounded,
    solve_ivp,
    verify_residual,
)
from .spectral import ContourSet, cauchy_function, enclose, riesz_split

__all__ = [name for name in dir() if not name.startswith("_")]
