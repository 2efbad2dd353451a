"""Linear and finite-alphabet precoders.

All finite-alphabet precoders work on the scaled channel ``h_tilde = beta * H``
with ``beta`` the ZF precoding factor. IDE2 and the unfolded network share
:func:`ide2_layer`, so their trajectories agree bit for bit when the network
sits at the IDE2 operating point.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import IllConditionedChannel, gram, precoding_factor_beta
from .constellation import FiniteAlphabet, project


class MultCounter:
    """Counts multiplications performed through it, per problem instance.

    A matrix-vector product with a ``K x N`` matrix costs ``K*N``; scaling an
    ``N``-vector by a scalar or diagonal costs ``N``. Batched operands are
    counted once per instance.
    """

    def __init__(self):
        self.count = 0

    def matvec(self, a: np.ndarray, v: np.ndarray) -> np.ndarray:
        self.count += a.shape[-2] * a.shape[-1]
        return (a @ v[..., None])[..., 0]

    def rmatvec(self, a: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.matvec(adjoint(a), v)

    def scale(self, c, v: np.ndarray) -> np.ndarray:
        self.count += v.shape[-1]
        return c * v


@dataclass
class PrecodeResult:
    x: np.ndarray
    beta: float
    iterations_run: int = 0
    mult_count: int = 0
    # (x_d^t, x^{t+1}) per iteration, only when requested
    trajectory: list | None = field(default=None, repr=False)


@dataclass(frozen=True)
class Ide2Config:
    t_max: int = 20
    alpha: float = 0.95
    gamma: float = 1.0

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


def adjoint(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the last two axes (contiguous copy)."""
    return np.ascontiguousarray(np.conj(np.swapaxes(a, -1, -2)))


def inverse_column_gains(h_tilde: np.ndarray) -> np.ndarray:
    """``1 / diag(H~^H H~)`` as a real vector (stacked over leading axes)."""
    gains = np.sum(np.abs(h_tilde) ** 2, axis=-2)
    if np.any(gains == 0):
        raise IllConditionedChannel("channel has an all-zero column")
    return 1.0 / gains


def ide2_layer(x_d, s, h_tilde, h_tilde_h, inv_gain, gamma, alpha, alphabet: FiniteAlphabet,
               counter: MultCounter, relaxed: bool = False):
    """One IDE2 iteration; ``h_tilde_h`` is the precomputed ``adjoint(h_tilde)``.

    Returns ``(residual, step, r, x_next, x_d_next)`` where ``step`` is the
    unscaled unbiased-LMMSE correction ``W_u (s - H~ x_d)``. ``relaxed`` skips
    the projection (used only for gradient checks).
    """
    residual = s - counter.matvec(h_tilde, x_d)
    step = counter.scale(inv_gain, counter.matvec(h_tilde_h, residual))
    r = x_d + counter.scale(gamma, step)
    x_next = r if relaxed else project(r, alphabet)
    x_d_next = counter.scale(alpha, x_d) + counter.scale(1.0 - alpha, x_next)
    return residual, step, r, x_next, x_d_next


def layer_mult_formula(n: int, k: int) -> int:
    """Multiplications per IDE2 layer as instrumented: ``2NK + 4N``."""
    return 2 * n * k + 4 * n


def ide2(h_tilde: np.ndarray, s: np.ndarray, a: FiniteAlphabet, cfg: Ide2Config = Ide2Config(),
         beta: float = float("nan"), record: bool = False) -> PrecodeResult:
    """Iterative discrete estimation with fixed step scale and damping.

    ``W_u`` is loop invariant, so its diagonal normaliser is computed once and
    applied as two matrix-vector products plus a diagonal scale per iteration.
    Returns the last projected iterate ``x^{T+1}``.
    """
    counter = MultCounter()
    inv_gain = inverse_column_gains(h_tilde)
    h_tilde_h = adjoint(h_tilde)
    x_d = np.zeros(h_tilde.shape[:-2] + h_tilde.shape[-1:], dtype=complex)
    traj = [] if record else None
    x = None
    for _ in range(cfg.t_max):
        _, _, _, x, x_d_next = ide2_layer(x_d, s, h_tilde, h_tilde_h, inv_gain, cfg.gamma, cfg.alpha, a, counter)
        if record:
            traj.append((x_d, x))
        x_d = x_d_next
    return PrecodeResult(x, beta, cfg.t_max, counter.count, traj)


def unbiasing_check(h_tilde: np.ndarray) -> np.ndarray:
    """``diag(W_u H~)`` for ``W_u = [diag(H~^H H~)]^{-1} H~^H``; all ones by construction."""
    w_u = inverse_column_gains(h_tilde)[..., :, None] * np.conj(np.swapaxes(h_tilde, -1, -2))
    return np.einsum("...nk,...kn->...n", w_u, h_tilde)


def zf_precode(h: np.ndarray, s: np.ndarray, p_t: float = 1.0) -> PrecodeResult:
    """Unquantised zero forcing ``x = H^H (H H^H)^{-1} s / beta``."""
    beta = precoding_factor_beta(h, p_t)
    z = np.linalg.solve(gram(h), s)
    x = (np.conj(h.T) @ z) / beta
    k, n = h.shape
    return PrecodeResult(x, beta, 0, n * k * k + n * k)


def zf_quantized(h: np.ndarray, s: np.ndarray, p_t: float, a: FiniteAlphabet) -> PrecodeResult:
    res = zf_precode(h, s, p_t)
    return PrecodeResult(project(res.x, a), res.beta, 0, res.mult_count)


def pgd_reference(h_tilde: np.ndarray, s: np.ndarray, a: FiniteAlphabet, lam: float, t_max: int,
                  beta: float = float("nan")) -> PrecodeResult:
    """Projected gradient descent with constant step on ``||s - H~ x||^2``.

    The gradient direction is ``H~^H (s - H~ x)``; the iterate itself is kept
    on the alphabet.
    """
    if lam < 0:
        raise ValueError("step size must be non-negative")
    counter = MultCounter()
    h_tilde_h = adjoint(h_tilde)
    x_d = np.zeros(h_tilde.shape[-1], dtype=complex)
    if t_max == 0:
        x_d = project(x_d, a)
    for _ in range(t_max):
        grad = counter.matvec(h_tilde_h, s - counter.matvec(h_tilde, x_d))
        x_d = project(x_d + counter.scale(lam, grad), a)
    return PrecodeResult(x_d, beta, t_max, counter.count)
