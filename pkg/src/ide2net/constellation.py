"""User-data constellations and the finite DAC alphabet.

Square QAM constellations carry per-axis reflected Gray labels. The point at
canonical index ``m`` carries the label whose integer value is ``m`` (in-phase
bits first, then quadrature bits), so nearest-point ties resolve toward the
smaller label.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _gray_levels(side: int) -> np.ndarray:
    """Amplitude for each per-axis Gray label value, unnormalised.

    Levels run from ``+(side-1)`` down to ``-(side-1)``; the level at position
    ``i`` in that order carries label ``i ^ (i >> 1)``.
    """
    levels = np.empty(side)
    for i in range(side):
        levels[i ^ (i >> 1)] = side - 1 - 2 * i
    return levels


@dataclass(frozen=True)
class Constellation:
    name: str
    points: np.ndarray = field(repr=False)
    bit_labels: np.ndarray = field(repr=False)

    @property
    def order(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        return self.bit_labels.shape[1]

    def modulate(self, bits) -> np.ndarray:
        return modulate(bits, self)

    def demodulate(self, y_hat) -> np.ndarray:
        return demodulate(y_hat, self)

    def indices_to_bits(self, idx) -> np.ndarray:
        return self.bit_labels[np.asarray(idx)]


def qam(order: int) -> Constellation:
    """Square Gray-labelled QAM with unit average power (``order`` = 4, 16, 64, ...)."""
    side = int(round(np.sqrt(order)))
    if side * side != order or side < 2 or side & (side - 1):
        raise ValueError(f"square QAM needs order = 4**k, got {order}")
    bits_axis = side.bit_length() - 1
    levels = _gray_levels(side)
    m = np.arange(order)
    points = levels[m >> bits_axis] + 1j * levels[m & (side - 1)]
    points = points / np.sqrt(np.mean(np.abs(points) ** 2))
    nbits = 2 * bits_axis
    labels = ((m[:, None] >> np.arange(nbits - 1, -1, -1)) & 1).astype(np.uint8)
    name = "qpsk" if order == 4 else f"{order}qam"
    return Constellation(name, points, labels)


_NAMED = {"qpsk": 4, "4qam": 4, "16qam": 16, "64qam": 64}


def constellation_by_name(name: str) -> Constellation:
    try:
        return qam(_NAMED[name.lower().replace("-", "")])
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}; choose from {sorted(_NAMED)}") from None


def _as_bits(bits) -> np.ndarray:
    if isinstance(bits, str):
        bits = [int(b) for b in bits]
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if np.any(arr > 1):
        raise ValueError("bits must be 0 or 1")
    return arr


def modulate(bits, c: Constellation) -> np.ndarray:
    """Map consecutive groups of ``log2(M)`` bits to constellation points."""
    arr = _as_bits(bits)
    b = c.bits_per_symbol
    if arr.size % b:
        raise ValueError(f"bit count {arr.size} not divisible by {b} bits/symbol")
    weights = 1 << np.arange(b - 1, -1, -1)
    idx = arr.reshape(-1, b).astype(np.int64) @ weights
    return c.points[idx]


def nearest_index(y_hat, c: Constellation) -> np.ndarray:
    """Index of the Euclidean-nearest point; ties go to the smaller index."""
    y = np.asarray(y_hat, dtype=complex)
    dist = np.abs(y[..., None] - c.points) ** 2
    return np.argmin(dist, axis=-1)


def demodulate(y_hat, c: Constellation) -> np.ndarray:
    """Hard-decision bits, shape ``y_hat.shape + (log2(M),)``."""
    return c.bit_labels[nearest_index(y_hat, c)]


@dataclass(frozen=True)
class FiniteAlphabet:
    """Per-antenna DAC output set."""

    points: np.ndarray = field(repr=False)
    per_antenna_power: float = 1.0
    one_bit: bool = False

    @property
    def size(self) -> int:
        return len(self.points)

    def project(self, v) -> np.ndarray:
        return project(v, self)

    def contains(self, x, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=complex)
        d = np.min(np.abs(x[..., None] - self.points), axis=-1)
        return bool(np.all(d <= atol))


def one_bit_alphabet(p_t: float = 1.0) -> FiniteAlphabet:
    """``sqrt(p_t/2) * {1+j, 1-j, -1+j, -1-j}``, so every point has power ``p_t``."""
    if p_t <= 0:
        raise ValueError("per-antenna power must be positive")
    a = np.sqrt(p_t / 2)
    pts = a * np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])
    return FiniteAlphabet(pts, float(p_t), one_bit=True)


def project(v, a: FiniteAlphabet) -> np.ndarray:
    """Element-wise nearest point of the alphabet.

    For one-bit alphabets this is the sign quantiser with zero mapped to the
    positive level; other alphabets break ties by point order.
    """
    v = np.asarray(v)
    if a.one_bit:
        amp = np.sqrt(a.per_antenna_power / 2)
        re = np.where(v.real >= 0, amp, -amp)
        im = np.where(v.imag >= 0, amp, -amp)
        return re + 1j * im
    v = v.astype(complex, copy=False)
    idx = np.argmin(np.abs(v[..., None] - a.points) ** 2, axis=-1)
    return a.points[idx]
