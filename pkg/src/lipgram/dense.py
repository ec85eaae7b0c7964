"""Spectral-norm estimators for dense matrices.

Iteration counts follow the Gram iterate index ``t``: ``G^(1) = G`` and
``G^(t+1) = G^(t)* G^(t)``. Running ``n_iter`` iterations yields the bound
``||G^(n_iter)||_F ** 2**(1 - n_iter)``, which is the Schatten ``2**n_iter``
norm of ``G``. One iteration is therefore the Frobenius norm, and
``n_iter`` iterations cost ``n_iter - 1`` matrix products.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ShapeError
from .linalg import as_matrix, conj_transpose, frobenius_norm, singular_values

METHODS = ("power_iteration", "gram_naive", "gram_rescaled", "svd_exact", "gram_eigen")


@dataclass
class EstimateReport:
    """Result of a dense spectral-norm estimator."""

    method: str
    value: float
    trace: list = field(default_factory=list)
    iterations: int = 0
    elapsed_seconds: float = 0.0

    def to_dict(self):
        return {
            "method": self.method,
            "value": self.value,
            "trace": list(self.trace),
            "iterations": self.iterations,
            "elapsed_seconds": self.elapsed_seconds,
        }


def _check_iters(n_iter, minimum=1):
    if int(n_iter) != n_iter or n_iter < minimum:
        raise ValueError(f"n_iter must be an integer >= {minimum}, got {n_iter!r}")
    return int(n_iter)


def _is_zero(g):
    return not np.any(g)


@dataclass(frozen=True)
class ScaledGram:
    """A Gram iterate kept in floating-point range by a log-domain scale.

    The true iterate is ``iterate * exp(log_scale)``. Works on stacks of
    matrices too, in which case ``log_scale`` has the batch shape.
    """

    iterate: np.ndarray
    log_scale: np.ndarray
    t: int = 1

    @classmethod
    def start(cls, g):
        g = np.asarray(g)
        return cls(g, np.zeros(g.shape[:-2]), 1)

    def bound(self):
        """``||G^(t)||_F ** 2**(1-t)`` undone from the rescaling."""
        with np.errstate(divide="ignore"):
            log_norm = np.log(frobenius_norm(self.iterate))
        return np.exp(2.0 ** (1 - self.t) * (log_norm + self.log_scale))

    def step(self, square=False):
        """Normalize, then form ``G* G`` (or ``G G`` when ``square``)."""
        norm = np.asarray(frobenius_norm(self.iterate))
        nonzero = norm > 0
        safe = np.where(nonzero, norm, 1.0)
        g = self.iterate / safe[..., None, None]
        g = g @ g if square else conj_transpose(g) @ g
        with np.errstate(divide="ignore"):
            log_norm = np.where(nonzero, np.log(safe), -np.inf)
        return ScaledGram(g, 2.0 * (self.log_scale + log_norm), self.t + 1)


def gram_sequence(g, n_iter, square=False):
    """Yield the rescaled iterates ``t = 1 .. n_iter``."""
    state = ScaledGram.start(g)
    yield state
    for _ in range(n_iter - 1):
        state = state.step(square=square)
        yield state


def gram_rescaled(g, n_iter):
    """Gram iteration with per-step Frobenius rescaling.

    The returned value is the Schatten ``2**n_iter`` norm of ``g``, an upper
    bound on its spectral norm; ``trace`` holds the bound at every ``t`` and
    is non-increasing.
    """
    g = as_matrix(g, "g")
    n_iter = _check_iters(n_iter)
    start = time.perf_counter()
    if _is_zero(g):
        return EstimateReport("gram_rescaled", 0.0, [], 0, time.perf_counter() - start)
    trace = [float(s.bound()) for s in gram_sequence(g, n_iter)]
    return EstimateReport("gram_rescaled", trace[-1], trace, n_iter, time.perf_counter() - start)


def gram_naive(g, n_iter):
    """Gram iteration without rescaling.

    The squared Frobenius norm of the iterate is formed explicitly, so the
    Schatten sum ``sum(sigma**2**t)`` must fit in a double. Raises
    NumericalError once it does not.
    """
    g = as_matrix(g, "g")
    n_iter = _check_iters(n_iter)
    start = time.perf_counter()
    if _is_zero(g):
        return EstimateReport("gram_naive", 0.0, [], 0, time.perf_counter() - start)
    trace = []
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, n_iter + 1):
            if t > 1:
                g = conj_transpose(g) @ g
            sq = np.sum(np.abs(g) ** 2)
            if not (np.isfinite(sq) and np.all(np.isfinite(g))):
                raise NumericalError(
                    f"gram_naive overflowed at iteration {t}; use gram_rescaled instead"
                )
            trace.append(float(sq ** (2.0 ** -t)))
    return EstimateReport("gram_naive", trace[-1], trace, n_iter, time.perf_counter() - start)


def gram_eigen(g, n_iter):
    """Squaring variant ``G <- G G`` bounding the spectral radius.

    Each trace entry ``||G^(2**(t-1))||_F ** 2**(1-t)`` is at least
    ``rho(g)`` and the sequence tends to it (Gelfand's formula).
    """
    g = as_matrix(g, "g")
    if g.shape[0] != g.shape[1]:
        raise ShapeError(f"gram_eigen needs a square matrix, got {g.shape}")
    n_iter = _check_iters(n_iter)
    start = time.perf_counter()
    if _is_zero(g):
        return EstimateReport("gram_eigen", 0.0, [], 0, time.perf_counter() - start)
    trace = [float(s.bound()) for s in gram_sequence(g, n_iter, square=True)]
    return EstimateReport("gram_eigen", trace[-1], trace, n_iter, time.perf_counter() - start)


def svd_exact(g):
    """Largest singular value from the Jacobi SVD (reference value)."""
    g = as_matrix(g, "g")
    start = time.perf_counter()
    sigma = float(singular_values(g)[0])
    return EstimateReport("svd_exact", sigma, [sigma], 1, time.perf_counter() - start)


def _random_unit(rng, size, complex_case):
    u = rng.standard_normal(size)
    if complex_case:
        u = u + 1j * rng.standard_normal(size)
    return u / np.linalg.norm(u)


def power_iteration(g, n_iter, seed=0):
    """Alternating power iteration on ``g`` and ``g*``.

    Starts from a seeded Gaussian vector. Each trace entry is
    ``|(G u)* v|`` after a full update, which never exceeds the spectral
    norm. If the start vector is annihilated by ``g`` the draw is repeated
    once with ``seed + 1``.
    """
    g = as_matrix(g, "g")
    n_iter = _check_iters(n_iter)
    start = time.perf_counter()
    if _is_zero(g):
        return EstimateReport("power_iteration", 0.0, [], 0, time.perf_counter() - start)
    gh = conj_transpose(g)
    complex_case = np.iscomplexobj(g)
    for attempt in range(2):
        rng = np.random.default_rng(seed + attempt)
        u = _random_unit(rng, g.shape[1], complex_case)
        trace = []
        for _ in range(n_iter):
            gu = g @ u
            norm = np.linalg.norm(gu)
            if norm == 0:
                break
            v = gu / norm
            ghv = gh @ v
            norm = np.linalg.norm(ghv)
            if norm == 0:
                break
            u = ghv / norm
            trace.append(float(abs(np.vdot(g @ u, v))))
        else:
            return EstimateReport(
                "power_iteration", trace[-1], trace, n_iter, time.perf_counter() - start
            )
    raise NumericalError("power_iteration: start vector fell in the null space twice")


def gram_bound_gradient(g, t):
    """Gradient of ``||G^(t)||_F ** 2**(1-t)`` with respect to ``g``.

    Closed form ``G (G* G)**(2**(t-1) - 1) / ||G^(t)||_F**(2 (1 - 2**-t))``.
    The bound is positively homogeneous of degree one, so its gradient is
    scale free; ``g`` is first divided by its own bound to keep the matrix
    powers in range. For complex ``g`` the real and imaginary parts of the
    result are the partial derivatives with respect to the real and
    imaginary parts of ``g``.
    """
    g = as_matrix(g, "g")
    t = _check_iters(t)
    if _is_zero(g):
        raise NumericalError("gram_bound_gradient: the bound is not differentiable at 0")
    scale = gram_rescaled(g, t).value
    gs = g / scale
    h = conj_transpose(gs) @ gs
    power = np.eye(h.shape[0], dtype=h.dtype)
    gram_t = gs
    square = h
    for _ in range(t - 1):
        gram_t = square
        power = power @ square
        square = square @ square
    denom = frobenius_norm(gram_t) ** (2.0 * (1.0 - 2.0 ** -t))
    return gs @ power / denom


def singular_vectors(g, n_iter):
    """Top singular triplet recovered from the final Gram iterate.

    The last iterate is close to a multiple of the projector on the top
    right singular vector, so its largest column gives ``u``; then
    ``v = g u / ||g u||`` and ``sigma = ||g u||``. Needs ``n_iter >= 2``
    and a simple top singular value.
    """
    g = as_matrix(g, "g")
    n_iter = _check_iters(n_iter, minimum=2)
    if _is_zero(g):
        raise NumericalError("singular_vectors: zero matrix has no dominant direction")
    *_, last = gram_sequence(g, n_iter)
    cols = np.linalg.norm(last.iterate, axis=0)
    i = int(np.argmax(cols))
    if not cols[i] > 0:
        raise NumericalError("singular_vectors: final Gram iterate has no non-zero column")
    u = last.iterate[:, i] / cols[i]
    gu = g @ u
    sigma = float(np.linalg.norm(gu))
    if sigma == 0:
        raise NumericalError("singular_vectors: recovered direction is in the null space")
    return u, gu / sigma, sigma
