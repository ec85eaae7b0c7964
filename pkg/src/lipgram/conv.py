"""Spectral-norm bounds for multi-channel 2-D convolutions.

A layer maps ``x`` of shape ``(c_in, n, n)`` to ``y`` of shape
``(c_out, n, n)`` by true convolution,
``y[o, a, b] = sum_{i,p,q} K[o, i, p, q] x[i, a - p + c, b - q + c]``.
With circular padding indices wrap modulo ``n`` and ``c = 0`` (kernel at the
origin), which makes the operator block-diagonal in the 2-D Fourier basis.
With zero padding out-of-range entries are zero and ``c = k // 2`` (the
usual "same" alignment).
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .dense import gram_sequence
from .errors import NumericalError, ShapeError
from .linalg import as_tensor4, fft, singular_values

PADDINGS = ("circular", "zero")
MATERIALIZE_LIMIT = 4096


@dataclass(frozen=True)
class ConvKernel:
    """A real filter ``(c_out, c_in, k, k)`` applied to ``n x n`` inputs."""

    filter: np.ndarray
    n: int
    padding: str = "circular"
    stride: int = 1

    def __post_init__(self):
        filt = as_tensor4(self.filter)
        object.__setattr__(self, "filter", filt)
        if int(self.n) != self.n or self.n < 1:
            raise ShapeError(f"input size n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.k > self.n:
            raise ShapeError(f"kernel size {self.k} exceeds input size {self.n}")
        if self.padding not in PADDINGS:
            raise ValueError(f"padding must be one of {PADDINGS}, got {self.padding!r}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValueError(f"stride must be a positive integer, got {self.stride!r}")

    @property
    def c_out(self):
        return self.filter.shape[0]

    @property
    def c_in(self):
        return self.filter.shape[1]

    @property
    def k(self):
        return self.filter.shape[2]

    def with_size(self, n):
        return ConvKernel(self.filter, n, self.padding, self.stride)


@dataclass(frozen=True)
class BlockDiagSpectrum:
    """The ``n*n`` frequency blocks ``D_i`` of a circular convolution.

    ``blocks[u * n + v]`` is the ``c_out x c_in`` matrix at frequency (u, v).
    """

    blocks: np.ndarray
    n: int

    def block(self, u, v):
        return self.blocks[u * self.n + v]

    def frequency(self, index):
        return divmod(int(index), self.n)


@dataclass
class ConvBoundReport:
    method: str
    value: float
    argmax_block: tuple = None
    iterations: int = 0
    elapsed_seconds: float = 0.0
    trace: list = field(default_factory=list)

    def to_dict(self):
        return {
            "method": self.method,
            "value": self.value,
            "argmax_block": None if self.argmax_block is None else list(self.argmax_block),
            "iterations": self.iterations,
            "elapsed_seconds": self.elapsed_seconds,
            "trace": list(self.trace),
        }


def _require_spectral(kernel, circular=True):
    if kernel.stride != 1:
        raise ValueError(f"spectral bounds need stride 1, got {kernel.stride}")
    if circular and kernel.padding != "circular":
        raise ValueError(f"this bound characterizes circular padding, got {kernel.padding!r}")


def extract_blocks(kernel):
    """FFT the zero-padded filter and gather one matrix per frequency."""
    _require_spectral(kernel)
    n, k = kernel.n, kernel.k
    # dft2 of the zero-padded filter; rows >= k are zero so the row pass
    # only touches the first k rows
    rows = np.zeros((kernel.c_out, kernel.c_in, k, n))
    rows[..., :k] = kernel.filter
    padded = np.zeros((kernel.c_out, kernel.c_in, n, n), dtype=np.complex128)
    padded[:, :, :k, :] = fft(rows, axis=-1)
    spec = fft(padded, axis=-2)
    blocks = np.ascontiguousarray(spec.transpose(2, 3, 0, 1)).reshape(n * n, kernel.c_out, kernel.c_in)
    return BlockDiagSpectrum(blocks, n)


def _batched_gram(blocks, n_iter):
    trace = []
    for state in gram_sequence(blocks, n_iter):
        bounds = state.bound()
        trace.append(float(bounds.max()))
    return bounds, trace


def gram_conv(kernel, n_iter):
    """Upper bound on the circular-convolution spectral norm.

    Every frequency block runs its own rescaled Gram iteration (no state is
    shared across blocks) and the bound is the largest block bound.
    """
    if n_iter < 1:
        raise ValueError(f"n_iter must be >= 1, got {n_iter}")
    start = time.perf_counter()
    spectrum = extract_blocks(kernel)
    bounds, trace = _batched_gram(spectrum.blocks, n_iter)
    i = int(np.argmax(bounds))
    return ConvBoundReport(
        "gram_conv", float(bounds[i]), spectrum.frequency(i), n_iter,
        time.perf_counter() - start, trace,
    )


def exact_conv_spectrum(kernel):
    """Exact circular spectral norm: max over per-block SVDs."""
    start = time.perf_counter()
    spectrum = extract_blocks(kernel)
    top = singular_values(spectrum.blocks)[:, 0]
    i = int(np.argmax(top))
    value = float(top[i])
    return ConvBoundReport(
        "exact_svd_per_block", value, spectrum.frequency(i), 1,
        time.perf_counter() - start, [value],
    )


def gram_conv_subsampled(kernel, n0, n_iter):
    """Gram bound computed at spatial size ``n0`` and inflated back.

    For ``n0 < n`` the bound at ``n0`` is multiplied by
    ``1 + 2 * (k // 2) / n0``.
    """
    if not kernel.k <= n0 <= kernel.n:
        raise ShapeError(f"need k <= n0 <= n, got k={kernel.k}, n0={n0}, n={kernel.n}")
    start = time.perf_counter()
    report = gram_conv(kernel.with_size(n0), n_iter)
    factor = 1.0 if n0 == kernel.n else 1.0 + 2 * (kernel.k // 2) / n0
    return ConvBoundReport(
        "gram_conv_subsampled", report.value * factor, report.argmax_block, n_iter,
        time.perf_counter() - start, [v * factor for v in report.trace],
    )


# --------------------------------------------------------------------------
# spatial operator and its adjoint


def _offset(kernel):
    return 0 if kernel.padding == "circular" else kernel.k // 2


def conv_apply(kernel, x):
    """Apply the layer to ``x`` of shape ``(..., c_in, n, n)``."""
    n, k = kernel.n, kernel.k
    x = np.asarray(x)
    out = np.zeros(x.shape[:-3] + (kernel.c_out, n, n), dtype=np.result_type(x, np.float64))
    if kernel.padding == "circular":
        for p in range(k):
            for q in range(k):
                shifted = np.roll(x, (p, q), axis=(-2, -1))
                out += np.einsum("oi,...iab->...oab", kernel.filter[:, :, p, q], shifted)
        return out
    c = _offset(kernel)
    xp = np.pad(x, [(0, 0)] * (x.ndim - 2) + [(k, k), (k, k)])
    for p in range(k):
        for q in range(k):
            s, t = c + k - p, c + k - q
            out += np.einsum("oi,...iab->...oab", kernel.filter[:, :, p, q], xp[..., s:s + n, t:t + n])
    return out


def conv_adjoint(kernel, y):
    """Apply the adjoint (transpose convolution) to ``y`` of shape ``(..., c_out, n, n)``."""
    n, k = kernel.n, kernel.k
    y = np.asarray(y)
    out = np.zeros(y.shape[:-3] + (kernel.c_in, n, n), dtype=np.result_type(y, np.float64))
    if kernel.padding == "circular":
        for p in range(k):
            for q in range(k):
                shifted = np.roll(y, (-p, -q), axis=(-2, -1))
                out += np.einsum("oi,...oab->...iab", kernel.filter[:, :, p, q], shifted)
        return out
    c = _offset(kernel)
    yp = np.pad(y, [(0, 0)] * (y.ndim - 2) + [(k, k), (k, k)])
    for p in range(k):
        for q in range(k):
            s, t = k + p - c, k + q - c
            out += np.einsum("oi,...oab->...iab", kernel.filter[:, :, p, q], yp[..., s:s + n, t:t + n])
    return out


def conv_power_iteration(kernel, n_iter, seed=0):
    """Power iteration on the spatial operator and its adjoint.

    Works for both paddings; with zero padding this estimates the norm of
    the doubly-block Toeplitz operator. Like any power iteration the value
    approaches the norm from below.
    """
    _require_spectral(kernel, circular=False)
    if n_iter < 1:
        raise ValueError(f"n_iter must be >= 1, got {n_iter}")
    start = time.perf_counter()
    if not np.any(kernel.filter):
        return ConvBoundReport("conv_power_iteration", 0.0, None, 0, time.perf_counter() - start, [])
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((kernel.c_in, kernel.n, kernel.n))
    u /= np.linalg.norm(u)
    trace = []
    for _ in range(n_iter):
        ku = conv_apply(kernel, u)
        norm = np.linalg.norm(ku)
        if norm == 0:
            raise NumericalError("conv_power_iteration: iterate fell in the null space")
        v = ku / norm
        u = conv_adjoint(kernel, v)
        u /= np.linalg.norm(u)
        trace.append(float(abs(np.vdot(conv_apply(kernel, u), v))))
    return ConvBoundReport(
        "conv_power_iteration", trace[-1], None, n_iter, time.perf_counter() - start, trace
    )


def materialize_conv_operator(kernel):
    """Dense matrix of the layer, one column per unit impulse.

    Rows and columns are ordered channel-major then row-major over space,
    i.e. index ``i * n * n + a * n + b``.
    """
    rows = kernel.c_out * kernel.n ** 2
    cols = kernel.c_in * kernel.n ** 2
    if rows > MATERIALIZE_LIMIT or cols > MATERIALIZE_LIMIT:
        raise ShapeError(
            f"operator {rows}x{cols} exceeds the materialization limit {MATERIALIZE_LIMIT}"
        )
    impulses = np.eye(cols).reshape(cols, kernel.c_in, kernel.n, kernel.n)
    images = conv_apply(kernel, impulses)
    return images.reshape(cols, rows).T.copy()
