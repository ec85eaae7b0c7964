"""Certified spectral-norm bounds via Gram iteration."""

from .conv import (
    BlockDiagSpectrum,
    ConvBoundReport,
    ConvKernel,
    conv_adjoint,
    conv_apply,
    conv_power_iteration,
    exact_conv_spectrum,
    extract_blocks,
    gram_conv,
    gram_conv_subsampled,
    materialize_conv_operator,
)
from .dense import (
    EstimateReport,
    ScaledGram,
    gram_bound_gradient,
    gram_eigen,
    gram_naive,
    gram_rescaled,
    power_iteration,
    singular_vectors,
    svd_exact,
)
from .errors import ConvergenceError, FormatError, LipError, NonFiniteError, NumericalError, ShapeError
from .linalg import SvdResult, dft2, idft2, singular_values, svd
from .network import (
    LayerSpec,
    NetworkBoundReport,
    NetworkSpec,
    UnknownActivationError,
    layer_bound,
    load_network,
    network_bound,
    parse_network,
)

__version__ = "0.1.0"
