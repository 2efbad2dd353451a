"""Rayleigh channel draws, noise, SNR bookkeeping and the ZF precoding factor.

Channels are stored users-by-antennas (``K x N``) so that ``y = H @ x`` maps
the ``N`` transmit samples to the ``K`` users. Every function taking an
``rng`` expects a :class:`numpy.random.Generator`; nothing draws from global
state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Gram matrices worse than this are treated as singular and the trial dropped.
MAX_GRAM_CONDITION = 1e12


class IllConditionedChannel(ArithmeticError):
    """Raised when ``H H^H`` is numerically singular."""


def sigma2_from_snr(snr_db: float, n_antennas: int, p_t: float = 1.0) -> float:
    # SNR counts the array gain: SNR = N * P_t / sigma^2
    return n_antennas * p_t / 10.0 ** (snr_db / 10.0)


def snr_from_sigma2(sigma2: float, n_antennas: int, p_t: float = 1.0) -> float:
    return 10.0 * np.log10(n_antennas * p_t / sigma2)


@dataclass(frozen=True)
class SystemConfig:
    n_antennas: int = 128
    n_users: int = 16
    p_t: float = 1.0
    snr_db: float = 14.0

    def __post_init__(self):
        if not (self.n_antennas >= self.n_users >= 1):
            raise ValueError(f"need N >= K >= 1, got N={self.n_antennas}, K={self.n_users}")
        if self.p_t <= 0:
            raise ValueError("p_t must be positive")

    @property
    def sigma2(self) -> float:
        return sigma2_from_snr(self.snr_db, self.n_antennas, self.p_t)

    def with_snr(self, snr_db: float) -> "SystemConfig":
        return SystemConfig(self.n_antennas, self.n_users, self.p_t, float(snr_db))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channel(cfg: SystemConfig, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """i.i.d. Rayleigh channel, shape ``(K, N)`` or ``(size, K, N)``."""
    shape = (cfg.n_users, cfg.n_antennas)
    if size is not None:
        shape = (size,) + shape
    return complex_normal(rng, shape)


def perturb_channel(h: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Imperfect CSI ``sqrt(1-eps) H + sqrt(eps) E`` with ``E`` ~ CN(0, 1).

    ``epsilon == 0`` returns ``h`` untouched (no draw is consumed), and
    ``epsilon == 1`` returns pure ``E``.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if epsilon == 0.0:
        return h
    e = complex_normal(rng, h.shape)
    if epsilon == 1.0:
        return e
    return np.sqrt(1.0 - epsilon) * h + np.sqrt(epsilon) * e


def gram(h: np.ndarray) -> np.ndarray:
    return h @ np.conj(np.swapaxes(h, -1, -2))


def check_conditioning(h: np.ndarray, limit: float = MAX_GRAM_CONDITION) -> None:
    cond = np.linalg.cond(gram(h))
    if not np.all(np.isfinite(cond)) or np.any(cond > limit):
        raise IllConditionedChannel(f"Gram condition number {np.max(cond):.3g} exceeds {limit:.0e}")


def trace_gram_inverse(h: np.ndarray) -> np.ndarray:
    """``tr((H H^H)^{-1})`` through a Cholesky factor of the K x K Gram.

    With ``G = L L^H``, ``tr(G^{-1}) = ||L^{-1}||_F^2``.
    """
    try:
        chol = np.linalg.cholesky(gram(h))
    except np.linalg.LinAlgError as exc:
        raise IllConditionedChannel("Gram matrix is not positive definite") from exc
    k = h.shape[-2]
    eye = np.broadcast_to(np.eye(k), chol.shape)
    linv = np.linalg.solve(chol, eye)
    return np.sum(np.abs(linv) ** 2, axis=(-2, -1))


def precoding_factor_beta(h: np.ndarray, p_t: float = 1.0) -> float | np.ndarray:
    """ZF precoding factor ``sqrt(tr((H H^H)^{-1}) / (N p_t))``.

    Accepts a single ``(K, N)`` channel or a stack ``(B, K, N)``.
    """
    n = h.shape[-1]
    beta = np.sqrt(trace_gram_inverse(h) / (n * p_t))
    return float(beta) if np.ndim(beta) == 0 else beta


def apply_channel(h: np.ndarray, x: np.ndarray, sigma2: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """``y = H x + n`` with ``n`` ~ CN(0, sigma2 I)."""
    x = np.asarray(x)
    if x.shape[-1] != h.shape[-1]:
        raise ValueError(f"x has {x.shape[-1]} entries but channel has {h.shape[-1]} antennas")
    y = (h @ x[..., None])[..., 0]
    if sigma2 == 0:
        return y
    if rng is None:
        raise ValueError("a random generator is required when sigma2 > 0")
    return y + np.sqrt(sigma2) * complex_normal(rng, y.shape)
