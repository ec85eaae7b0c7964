"""Dense linear algebra primitives.

Matrices are plain numpy arrays of dtype float64 or complex128. Real input
stays real: it is a subset of the complex case and every routine here
handles both. Stacked input of shape ``(..., p, q)`` is accepted wherever a
batch makes sense (Frobenius norms, DFTs, singular values).

The DFT follows the unnormalized forward convention
``Y[u] = sum_a x[a] exp(-2j*pi*u*a/n)`` with inverse ``(1/n) * conj``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, NonFiniteError, ShapeError

EPS = np.finfo(np.float64).eps
TINY = np.finfo(np.float64).tiny

SVD_MAX_SWEEPS = 100
SVD_TOL = 1e-14


def as_matrix(a, name="matrix", allow_batch=False):
    """Validate ``a`` and return it as a float64 or complex128 array.

    Raises ShapeError for empty or wrongly-dimensioned input and
    NonFiniteError when any entry is NaN/Inf.
    """
    arr = np.asarray(a)
    if arr.dtype.kind in "biuf":
        arr = arr.astype(np.float64, copy=False)
    elif arr.dtype.kind == "c":
        arr = arr.astype(np.complex128, copy=False)
    else:
        raise TypeError(f"{name}: unsupported dtype {arr.dtype}")
    if arr.ndim != 2 and not (allow_batch and arr.ndim >= 2):
        raise ShapeError(f"{name}: expected a 2-D matrix, got shape {arr.shape}")
    if 0 in arr.shape:
        raise ShapeError(f"{name}: empty matrix of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name}: entries must be finite")
    return arr


def as_tensor4(a, name="filter"):
    """Validate a real 4-D filter of shape (c_out, c_in, k, k)."""
    arr = np.asarray(a)
    if arr.dtype.kind not in "biuf":
        raise TypeError(f"{name}: filter must be real, got dtype {arr.dtype}")
    arr = arr.astype(np.float64, copy=False)
    if arr.ndim != 4:
        raise ShapeError(f"{name}: expected 4 dims (c_out, c_in, k, k), got {arr.shape}")
    if 0 in arr.shape:
        raise ShapeError(f"{name}: empty dimension in {arr.shape}")
    if arr.shape[2] != arr.shape[3]:
        raise ShapeError(f"{name}: spatial dims must be square, got {arr.shape[2:]}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name}: entries must be finite")
    return arr


def matmul(a, b):
    """Dense product ``a @ b`` with shape checking."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b


def conj_transpose(a):
    """Conjugate transpose of the trailing two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def frobenius_norm(a):
    """Frobenius norm over the last two axes.

    The sum of squares is formed after dividing by the largest modulus, so
    matrices with entries near the top of the double range do not overflow.
    """
    a = np.asarray(a)
    mag = np.abs(a)
    scale = mag.max(axis=(-2, -1), keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    out = np.sqrt(np.sum((mag / safe) ** 2, axis=(-2, -1))) * scale[..., 0, 0]
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# discrete Fourier transform


def _smallest_factor(n):
    if n % 2 == 0:
        return 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return f
        f += 2
    return n


@lru_cache(maxsize=None)
def dft_matrix(n):
    """The ``n x n`` DFT matrix with entries ``exp(-2j*pi*u*v/n)``."""
    idx = np.arange(n)
    # reduce the exponent mod n before scaling, keeps the phases exact
    return np.exp(-2j * np.pi * (np.outer(idx, idx) % n) / n)


@lru_cache(maxsize=None)
def _twiddles(n, r):
    m = n // r
    return np.exp(-2j * np.pi * (np.outer(np.arange(r), np.arange(m)) % n) / n)


def _fft_last(x):
    n = x.shape[-1]
    if n == 1:
        return x.astype(np.complex128, copy=True)
    r = _smallest_factor(n)
    if r == n:
        return x @ dft_matrix(n).T
    m = n // r
    # xs[..., j, i] = x[..., i*r + j]
    xs = np.swapaxes(x.reshape(*x.shape[:-1], m, r), -1, -2)
    ys = _fft_last(xs) * _twiddles(n, r)
    # out[k2*m + k1] = sum_j W_r[k2, j] ys[j, k1]
    if r == 2:
        head, tail = ys[..., 0, :], ys[..., 1, :]
        return np.concatenate([head + tail, head - tail], axis=-1)
    out = np.tensordot(dft_matrix(r), ys, axes=([1], [-2]))
    return np.moveaxis(out, 0, -2).reshape(*x.shape[:-1], n)


def fft(x, axis=-1):
    """Unnormalized forward DFT along one axis.

    Mixed radix: composite lengths recurse on their smallest prime factor,
    prime lengths fall back to direct O(n^2) summation.
    """
    x = np.asarray(x)
    if x.shape[axis] == 0:
        raise ShapeError("fft: transform length must be positive")
    moved = np.moveaxis(x, axis, -1)
    return np.moveaxis(_fft_last(moved), -1, axis)


def dft2(x):
    """2-D unnormalized DFT over the last two axes.

    ``Y[u, v] = sum_{a,b} x[a, b] exp(-2j*pi*(u*a + v*b)/n)``.
    """
    x = np.asarray(x)
    if x.ndim < 2:
        raise ShapeError(f"dft2: need at least 2 dims, got shape {x.shape}")
    if x.shape[-1] == 0 or x.shape[-2] == 0:
        raise ShapeError("dft2: transform size must be positive")
    return fft(fft(x, axis=-1), axis=-2)


def idft2(y):
    """Inverse of :func:`dft2`."""
    y = np.asarray(y)
    n1, n2 = y.shape[-2:]
    return np.conj(dft2(np.conj(y))) / (n1 * n2)


# --------------------------------------------------------------------------
# singular value decomposition


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``a = left_vectors @ diag(singular_values) @ right_vectors^*``."""

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self):
        return (self.left_vectors * self.singular_values) @ conj_transpose(self.right_vectors)


@lru_cache(maxsize=None)
def _round_robin(n):
    # circle-method tournament: n-1 rounds of disjoint pairs covering all pairs
    players = list(range(n + (n % 2)))
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        pairs = [(players[k], players[size - 1 - k]) for k in range(size // 2)]
        pairs = [(min(p), max(p)) for p in pairs if max(p) < n]
        if pairs:
            i, j = zip(*pairs)
            rounds.append((np.array(i), np.array(j)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi(cols, want_vectors):
    """One-sided Jacobi on the rows of ``cols`` (shape (B, n, m)).

    Row ``i`` of ``cols[b]`` is column ``i`` of the b-th matrix. Rotations are
    applied until every pair is orthogonal to ``tol`` relative to the pair's
    norms. Returns the orthogonalized rows, the accumulated right factor and
    the per-matrix power-of-two scale the rows are expressed in.
    """
    batch, n, m = cols.shape
    # power-of-two prescale: exact, and keeps squared norms out of underflow
    top = np.abs(cols).max(axis=(-2, -1)) if cols.size else np.zeros(batch)
    _, expo = np.frexp(np.where(top > 0, top, 1.0))
    unit = np.ldexp(1.0, expo)[:, None, None]
    x = cols / unit
    # columns below roundoff relative to the whole matrix count as null
    floor = ((EPS * np.sqrt(np.sum((x * np.conj(x)).real, axis=(-2, -1)))) ** 2)[:, None]
    v = None
    if want_vectors:
        v = np.broadcast_to(np.eye(n, dtype=x.dtype), (batch, n, n)).copy()
    tol = max(SVD_TOL, np.sqrt(m) * EPS)
    rounds = _round_robin(n)
    best = np.inf
    for _ in range(SVD_MAX_SWEEPS):
        rotated = False
        worst = 0.0
        for i, j in rounds:
            xi = x[:, i, :]
            xj = x[:, j, :]
            alpha = np.sum((xi * np.conj(xi)).real, axis=-1)
            beta = np.sum((xj * np.conj(xj)).real, axis=-1)
            gamma = np.sum(np.conj(xi) * xj, axis=-1)
            mag = np.abs(gamma)
            scale = np.sqrt(alpha * beta)
            active = (mag > tol * scale) & (mag > TINY) & (alpha > floor) & (beta > floor)
            if scale.size:
                live = (scale > 0) & (alpha > floor) & (beta > floor)
                ratio = np.where(live, mag / np.where(live, scale, 1.0), 0.0)
                worst = max(worst, float(ratio.max()))
            if not active.any():
                continue
            rotated = True
            safe = np.where(active, mag, 1.0)
            zeta = (beta - alpha) / (2.0 * safe)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            c = c[..., None]
            s = s[..., None]
            # unit-modulus factor turning gamma real and positive (a sign for real input)
            phase = np.where(active, np.conj(gamma) / safe, 1.0)[..., None]
            xj = xj * phase
            x[:, i, :] = c * xi - s * xj
            x[:, j, :] = s * xi + c * xj
            if v is not None:
                vi = v[:, :, i]
                vj = v[:, :, j]
                vj = vj * np.swapaxes(phase, -1, -2)
                cs = np.swapaxes(c, -1, -2)
                ss = np.swapaxes(s, -1, -2)
                v[:, :, i] = cs * vi - ss * vj
                v[:, :, j] = ss * vi + cs * vj
        best = min(best, worst)
        if not rotated:
            return x, v, unit[:, 0, 0]
    raise ConvergenceError(
        f"Jacobi SVD did not converge in {SVD_MAX_SWEEPS} sweeps", best_residual=best
    )


def _orient(a):
    # work on the side with fewer columns; returns rows = columns of the oriented matrix
    wide = a.shape[-2] < a.shape[-1]
    work = conj_transpose(a) if wide else a
    return wide, np.ascontiguousarray(np.swapaxes(work, -1, -2))


def singular_values(a):
    """Singular values (descending) of a matrix or a stack of matrices."""
    a = as_matrix(a, allow_batch=True)
    _, cols = _orient(a)
    lead = cols.shape[:-2]
    flat = cols.reshape(-1, *cols.shape[-2:])
    x, _, unit = _jacobi(flat, want_vectors=False)
    sv = np.sqrt(np.sum((x * np.conj(x)).real, axis=-1)) * unit[:, None]
    sv = -np.sort(-sv, axis=-1)
    return sv.reshape(*lead, sv.shape[-1])


def _complete_basis(u, keep):
    # replace columns outside `keep` with an orthonormal completion
    if keep.all():
        return u
    p, k = u.shape
    good = u[:, keep]
    candidates = np.concatenate([good, np.eye(p, dtype=u.dtype)], axis=1)
    q, _ = np.linalg.qr(candidates)
    basis = q[:, good.shape[1]:]
    filled = u.copy()
    filled[:, ~keep] = basis[:, : int((~keep).sum())]
    return filled


def svd(a):
    """Thin SVD by one-sided Jacobi.

    Returns an :class:`SvdResult` with ``min(p, q)`` singular values in
    non-increasing order and orthonormal left/right vectors. Deterministic
    for a fixed input.
    """
    a = as_matrix(a, "a")
    wide, cols = _orient(a)
    x, v, unit = _jacobi(cols[None], want_vectors=True)
    x, v = x[0], v[0]
    scaled = np.sqrt(np.sum((x * np.conj(x)).real, axis=-1))
    order = np.argsort(-scaled, kind="stable")
    scaled = scaled[order]
    x = x[order]
    v = v[:, order]
    sv = scaled * unit[0]
    keep = scaled > TINY
    u = np.swapaxes(x, 0, 1) / np.where(keep, scaled, 1.0)
    u = _complete_basis(u, keep)
    if wide:
        u, v = v, u
    return SvdResult(sv, u, v)
