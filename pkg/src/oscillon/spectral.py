"""Periodic grid on (0, 1), Fourier transforms and the norms of the phase spaces.

Spectra are stored in real-FFT layout: ``s[k]`` for ``k = 0 .. N/2`` is the
coefficient of ``exp(2 pi i k x)``, normalised so that ``s[0]`` is the mean of
the field.  Negative wavenumbers follow from Hermitian symmetry and are never
stored, which makes the symmetry hold by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPowerOfTwo

__all__ = [
    "Grid",
    "State",
    "transform",
    "inverse",
    "full_spectrum",
    "apply_A",
    "norms",
    "l2_norm",
    "lq_norm",
    "h1_seminorm",
    "h2_seminorm",
    "mean_split",
    "energy_X",
    "norm_Xt",
    "norm_Yt",
    "resample",
]


def _check_size(N: int) -> int:
    N = int(N)
    if N < 1 or N & (N - 1):
        raise NonPowerOfTwo(f"N = {N} is not a power of two")
    return N


@dataclass(frozen=True)
class Grid:
    """``N`` equispaced nodes ``x_j = j/N`` on the unit periodic interval."""

    N: int

    def __post_init__(self):
        _check_size(self.N)
        if self.N < 8:
            raise ValueError(f"grid needs N >= 8, got {self.N}")

    @property
    def dx(self) -> float:
        return 1.0 / self.N

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N) / self.N

    @property
    def k(self) -> np.ndarray:
        """Nonnegative wavenumbers ``0 .. N/2`` of the real-FFT layout."""
        return np.arange(self.N // 2 + 1)

    @property
    def omega(self) -> np.ndarray:
        """Angular frequencies ``2 pi k``; ``A`` has eigenvalue ``omega**2``."""
        return 2.0 * np.pi * self.k

    @property
    def weights(self) -> np.ndarray:
        """Parseval multiplicities: 1 for k = 0 and N/2, 2 otherwise."""
        w = np.full(self.N // 2 + 1, 2.0)
        w[0] = w[-1] = 1.0
        return w

    def zeros(self) -> np.ndarray:
        return np.zeros(self.N)


def _grid_of(f) -> Grid:
    return Grid(len(f))


@dataclass
class State:
    """Phase-space point ``(u, v = du/dt)`` on the grid, stamped with ``t``."""

    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape or self.u.ndim != 1:
            raise ValueError("u and v must be 1-D arrays on the same grid")
        self.t = float(self.t)

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "State":
        return cls(grid.zeros(), grid.zeros(), t)

    @property
    def grid(self) -> Grid:
        return _grid_of(self.u)

    def copy(self) -> "State":
        return State(self.u.copy(), self.v.copy(), self.t)

    def __sub__(self, other: "State") -> "State":
        return State(self.u - other.u, self.v - other.v, self.t)

    def __add__(self, other: "State") -> "State":
        return State(self.u + other.u, self.v + other.v, self.t)

    def __mul__(self, c: float) -> "State":
        return State(c * self.u, c * self.v, self.t)

    __rmul__ = __mul__

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.u).all() and np.isfinite(self.v).all())


# --- transforms -------------------------------------------------------------

def transform(f) -> np.ndarray:
    """Real field -> half spectrum ``(k = 0 .. N/2)`` with ``s[0] = mean(f)``."""
    f = np.asarray(f, dtype=float)
    _check_size(len(f))
    return np.fft.rfft(f) / len(f)


def inverse(s, N: int | None = None) -> np.ndarray:
    """Half spectrum -> real field.  Imaginary parts of the self-conjugate
    modes (k = 0 and N/2) are discarded, which enforces Hermitian symmetry."""
    s = np.asarray(s, dtype=complex)
    N = _check_size(N if N is not None else 2 * (len(s) - 1))
    return np.fft.irfft(s * N, n=N)


def full_spectrum(s) -> tuple[np.ndarray, np.ndarray]:
    """Expand a half spectrum to ``k = -N/2 .. N/2 - 1``; returns (k, coeffs)."""
    s = np.asarray(s, dtype=complex)
    N = 2 * (len(s) - 1)
    k = np.arange(-N // 2, N // 2)
    coeffs = np.where(k >= 0, s[np.clip(k, 0, N // 2)], np.conj(s[np.clip(-k, 0, N // 2)]))
    # k = -N/2 carries the Nyquist coefficient itself (real by symmetry)
    coeffs[0] = s[-1].real
    return k, coeffs


def apply_A(s, power=1) -> np.ndarray:
    """Multiply each coefficient by ``omega_k ** (2 power)``; kills the mean."""
    s = np.asarray(s, dtype=complex)
    omega = 2.0 * np.pi * np.arange(len(s))
    return s * omega ** (2.0 * float(power))


# --- norms ------------------------------------------------------------------

def _parseval(s, weight_power: float) -> float:
    s = np.asarray(s)
    w = np.full(len(s), 2.0)
    w[0] = w[-1] = 1.0
    lam = (2.0 * np.pi * np.arange(len(s))) ** weight_power
    return float(np.sum(w * lam * np.abs(s) ** 2))


def l2_norm(f) -> float:
    return math.sqrt(_parseval(transform(f), 0.0))


def h1_seminorm(f) -> float:
    """``|A^(1/2) f|``."""
    return math.sqrt(_parseval(transform(f), 2.0))


def h2_seminorm(f) -> float:
    """``|A f|``."""
    return math.sqrt(_parseval(transform(f), 4.0))


def lq_norm(f, q: float) -> float:
    """Collocation quadrature: ``(mean_j |f_j|**q) ** (1/q)``."""
    if q < 1:
        raise ValueError("q must be >= 1")
    f = np.asarray(f, dtype=float)
    return float(np.mean(np.abs(f) ** q) ** (1.0 / q))


def norms(f, q: float = 2) -> dict:
    s = transform(f)
    return {
        "L2": math.sqrt(_parseval(s, 0.0)),
        "Lq": lq_norm(f, q),
        "H1semi": math.sqrt(_parseval(s, 2.0)),
        "H2semi": math.sqrt(_parseval(s, 4.0)),
    }


def mean_split(f) -> tuple[float, np.ndarray]:
    f = np.asarray(f, dtype=float)
    m = float(np.mean(f))
    return m, f - m


# --- phase-space energy and norms ---------------------------------------------

def _lq_power(u, q) -> float:
    return float(np.mean(np.abs(u) ** q))


def energy_X(z: State, q: int, H: float) -> float:
    """``e^(-2Ht)|A^(1/2)u|^2 + (2/q)||u||_q^q + |u|^2 + |v|^2``."""
    su = transform(z.u)
    return (
        math.exp(-2.0 * H * z.t) * _parseval(su, 2.0)
        + (2.0 / q) * _lq_power(z.u, q)
        + _parseval(su, 0.0)
        + _parseval(transform(z.v), 0.0)
    )


def norm_Xt(z: State, q: int, H: float) -> float:
    """``e^(-Ht)|A^(1/2)u| + ||u||_q + |v|``."""
    return math.exp(-H * z.t) * h1_seminorm(z.u) + lq_norm(z.u, q) + l2_norm(z.v)


def norm_Yt(z: State, q: int, H: float) -> float:
    """``e^(-Ht)|Au| + ||u||_q + |A^(1/2)v| + |v|``."""
    sv = transform(z.v)
    return (
        math.exp(-H * z.t) * h2_seminorm(z.u)
        + lq_norm(z.u, q)
        + math.sqrt(_parseval(sv, 2.0))
        + math.sqrt(_parseval(sv, 0.0))
    )


def resample(f, M: int) -> np.ndarray:
    """Trigonometric interpolation of ``f`` onto ``M`` nodes (truncate or pad
    the spectrum; a Nyquist coefficient is split or dropped symmetrically)."""
    f = np.asarray(f, dtype=float)
    N = len(f)
    M = _check_size(M)
    if M == N:
        return f.copy()
    s = transform(f)
    out = np.zeros(M // 2 + 1, dtype=complex)
    if M > N:
        out[: N // 2] = s[: N // 2]
        out[N // 2] = 0.5 * s[N // 2].real  # cos(pi N x) splits between +-N/2
    else:
        out[: M // 2] = s[: M // 2]
        out[M // 2] = 2.0 * s[M // 2].real  # keep the cosine part of +-M/2
    return inverse(out, M)
