"""Time stepping for ``u_tt + H u_t + e^(-2Ht) A u + phi(u) = 0`` on (0, 1).

The linear part is solved in closed form mode by mode.  With
``xi(t) = (omega/H) e^(-Ht)`` every mode of the linear equation satisfies
``d^2u/dxi^2 + u = 0``, so one step is a rotation by the phase
``xi(t0) - xi(t1)`` followed by the rescaling of ``v`` that the chain rule
brings in.  No stability restriction applies however large ``e^(-Ht)`` gets;
the only limit is how far the phase can be reduced modulo 2 pi, handled with
extended precision in :meth:`LinearPropagator.phases`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import mpmath
import numpy as np

from .errors import ArgumentOverflow, CflViolation, NonFinite, StepUnderflow, TimeOrder
from .potential import Potential
from .spectral import State, energy_X

__all__ = [
    "StepperConfig",
    "ModeCoeffs",
    "LinearPropagator",
    "SpectralStepper",
    "TrajectoryRecord",
    "rhs",
    "linear_propagate_exact",
    "step",
    "evolve",
    "apply_process",
    "time_grid",
    "XI_LIMIT",
]

METHODS = ("strang_exact", "rk4")
XI_LIMIT = 2.0**52
_SMALL_PHASE = 0.5
_HI_BITS = 26


@dataclass(frozen=True)
class StepperConfig:
    method: str = "strang_exact"
    dt: float = 1e-2
    adapt: bool = False
    local_error_target: float = 1e-8
    dealias: bool = False
    max_halvings: int = 30

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.local_error_target > 0:
            raise ValueError("local_error_target must be > 0")


@dataclass
class ModeCoeffs:
    """Half spectra of ``u`` and ``v`` at time ``t`` with the phase variable."""

    uh: np.ndarray
    vh: np.ndarray
    t: float
    H: float

    @property
    def xi(self) -> np.ndarray:
        omega = 2.0 * np.pi * np.arange(len(self.uh))
        return omega / self.H * math.exp(-self.H * self.t)


# --- exact linear flow ----------------------------------------------------------

def _phase_cycles_fraction(H: float, t0: float, t1: float) -> tuple[float, float]:
    """``frac((e^(-H t0) - e^(-H t1)) / H)`` split as ``hi + lo``.

    ``hi`` sits on a 2**-26 grid so that ``k * hi`` is exact in double
    precision for every wavenumber we use; ``lo`` carries the remaining bits.
    The phase of mode k is ``2 pi k`` times this quantity, and integer parts
    drop out because k is an integer.
    """
    with mpmath.workprec(200):
        Hm = mpmath.mpf(H)
        c = (mpmath.exp(-Hm * mpmath.mpf(t0)) - mpmath.exp(-Hm * mpmath.mpf(t1))) / Hm
        frac = c - mpmath.floor(c)
        scale = 2**_HI_BITS
        hi = mpmath.floor(frac * scale) / scale
        return float(hi), float(frac - hi)


class LinearPropagator:
    """Closed-form flow of ``u_tt + H u_t + e^(-2Ht) A u = 0`` on half spectra."""

    def __init__(self, N: int, H: float):
        if not H > 0:
            raise ValueError("H must be > 0")
        self.N = int(N)
        self.H = float(H)
        self.k = np.arange(self.N // 2 + 1, dtype=float)
        self.omega = 2.0 * np.pi * self.k

    def max_xi(self, t: float) -> float:
        expo = -self.H * t
        if expo > 700:
            return math.inf
        return self.omega[-1] / self.H * math.exp(expo)

    def horizon(self) -> float:
        """Earliest start time whose phases can still be reduced accurately."""
        return -math.log(XI_LIMIT * self.H / self.omega[-1]) / self.H

    def phases(self, t0: float, t1: float):
        """Per-mode ``cos``, ``sin`` of the phase, the ``u``-from-``v`` gain,
        ``omega e^(-H t1)`` and the damping factor ``e^(-H (t1 - t0))``.

        Tables are cached per ``(t0, t1)``: runs sharing a time grid (seeds of
        one family, the three fields of a decomposition) reuse them.
        """
        return self._phases(float(t0), float(t1))

    @lru_cache(maxsize=16384)
    def _phases(self, t0: float, t1: float):
        H = self.H
        xi0_max = self.max_xi(t0)
        if not xi0_max <= XI_LIMIT:
            raise ArgumentOverflow(
                f"phase (omega/H) e^(-Ht) = {xi0_max:.3g} at t = {t0} exceeds 2^52; "
                f"start no earlier than t = {self.horizon():.6g} for N = {self.N}, H = {H}"
            )
        dt = t1 - t0
        r = math.exp(-H * dt)
        w = -math.expm1(-H * dt)
        speed0 = self.omega * math.exp(-H * t0)
        theta = speed0 / H * w
        small = theta < _SMALL_PHASE
        if small.all():
            th = theta
        else:
            hi, lo = _phase_cycles_fraction(H, t0, t1)
            cycles = np.mod(self.k * hi, 1.0) + self.k * lo
            th = np.where(small, theta, 2.0 * np.pi * cycles)
        cos, sin = np.cos(th), np.sin(th)
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = np.where(small, (w / H) * np.sinc(theta / np.pi), sin / speed0)
        speed1 = self.omega * math.exp(-H * t1)
        for a in (cos, sin, gain, speed1):
            a.setflags(write=False)
        return cos, sin, gain, speed1, r

    def advance(self, uh, vh, t0: float, t1: float):
        if t1 == t0:
            return uh.copy(), vh.copy()
        cos, sin, gain, speed1, r = self.phases(t0, t1)
        u1 = uh * cos + vh * gain
        v1 = -uh * (speed1 * sin) + vh * (r * cos)
        return u1, v1


@lru_cache(maxsize=64)
def _propagator(N: int, H: float) -> LinearPropagator:
    return LinearPropagator(N, H)


def linear_propagate_exact(z: State, t1: float, H: float) -> State:
    """Exact solution of the linear damped wave equation from ``z.t`` to ``t1``."""
    N = len(z.u)
    prop = _propagator(N, float(H))
    uh, vh = np.fft.rfft(z.u) / N, np.fft.rfft(z.v) / N
    u1, v1 = prop.advance(uh, vh, z.t, t1)
    return State(np.fft.irfft(u1 * N, n=N), np.fft.irfft(v1 * N, n=N), t1)


# --- nonlinear forcing and steppers --------------------------------------------

def _pad_size(N: int, pot: Potential) -> int:
    """Zero-padded grid size that keeps products of degree deg(phi) alias-free."""
    d = max(pot.degree - 1, 1)
    need = (d + 1) * N / 2
    M = N
    while M < need:
        M *= 2
    return M


class SpectralStepper:
    """Shared machinery for splitting steps on normalised half spectra."""

    def __init__(self, N: int, H: float, dealias: bool = False):
        self.N = int(N)
        self.H = float(H)
        self.dealias = dealias
        self.prop = _propagator(self.N, self.H)

    def to_spectral(self, z: State):
        N = self.N
        return np.fft.rfft(z.u) / N, np.fft.rfft(z.v) / N

    def to_state(self, uh, vh, t: float) -> State:
        N = self.N
        return State(np.fft.irfft(uh * N, n=N), np.fft.irfft(vh * N, n=N), t)

    def field(self, uh) -> np.ndarray:
        return np.fft.irfft(uh * self.N, n=self.N)

    def spectrum(self, f) -> np.ndarray:
        """Half spectrum of a grid field with the Nyquist mode removed, so
        kicks never create content that the spectral derivative cannot see."""
        fh = np.fft.rfft(f) / self.N
        fh[-1] = 0.0
        return fh

    def force(self, uh, pot: Potential) -> np.ndarray:
        """Half spectrum of ``phi(u)``."""
        if not self.dealias:
            return self.spectrum(pot.phi(self.field(uh)))
        N, M = self.N, _pad_size(self.N, pot)
        padded = np.zeros(M // 2 + 1, dtype=complex)
        padded[: N // 2] = uh[: N // 2]
        padded[N // 2] = 0.5 * uh[N // 2].real
        fM = np.fft.rfft(pot.phi(np.fft.irfft(padded * M, n=M))) / M
        fh = fM[: N // 2 + 1].copy()
        fh[-1] = 0.0
        return fh

    def strang(self, uh, vh, t0: float, t1: float, pot: Potential):
        h = 0.5 * (t1 - t0)
        linear = pot.is_linear
        if not linear:
            vh = vh - h * self.force(uh, pot)
        uh, vh = self.prop.advance(uh, vh, t0, t1)
        if not linear:
            vh = vh - h * self.force(uh, pot)
        return uh, vh


def rhs(z: State, pot: Potential, H: float, dealias: bool = False):
    """``(du, dv) = (v, -H v - e^(-2Ht) A u - phi(u))``."""
    N = len(z.u)
    uh = np.fft.rfft(z.u)
    Au = np.fft.irfft(uh * (2.0 * np.pi * np.arange(N // 2 + 1)) ** 2, n=N)
    if pot.is_linear:
        phi = 0.0
    elif dealias:
        st = SpectralStepper(N, H, dealias=True)
        phi = st.field(st.force(uh / N, pot))
    else:
        phi = pot.phi(z.u)
    dv = -H * z.v - math.exp(-2.0 * H * z.t) * Au - phi
    return z.v.copy(), dv


def _rk4(z: State, t1: float, pot: Potential, H: float, dealias: bool) -> State:
    dt = t1 - z.t
    dx = 1.0 / len(z.u)
    limit = 0.5 * dx * math.exp(H * z.t) / math.pi
    if dt > limit:
        raise CflViolation(f"rk4 needs dt <= {limit:.3g} at t = {z.t}, got {dt:.3g}")

    def f(u, v, t):
        return rhs(State(u, v, t), pot, H, dealias)

    t0 = z.t
    k1u, k1v = f(z.u, z.v, t0)
    k2u, k2v = f(z.u + 0.5 * dt * k1u, z.v + 0.5 * dt * k1v, t0 + 0.5 * dt)
    k3u, k3v = f(z.u + 0.5 * dt * k2u, z.v + 0.5 * dt * k2v, t0 + 0.5 * dt)
    k4u, k4v = f(z.u + dt * k3u, z.v + dt * k3v, t1)
    u = z.u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
    v = z.v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return State(u, v, t1)


def _check_finite(z: State) -> State:
    if not z.is_finite():
        raise NonFinite(f"non-finite sample at t = {z.t}")
    return z


def step(z: State, cfg: StepperConfig, pot: Potential, H: float, dt: Optional[float] = None) -> State:
    """One step of size ``dt`` (default ``cfg.dt``), no adaptivity."""
    dt = cfg.dt if dt is None else dt
    t1 = z.t + dt
    if cfg.method == "rk4":
        return _check_finite(_rk4(z, t1, pot, H, cfg.dealias))
    st = SpectralStepper(len(z.u), H, cfg.dealias)
    uh, vh = st.strang(*st.to_spectral(z), z.t, t1, pot)
    return _check_finite(st.to_state(uh, vh, t1))


# --- trajectories -------------------------------------------------------------

@dataclass
class TrajectoryRecord:
    times: list = field(default_factory=list)
    states: Optional[list] = None
    rejected: int = 0

    @property
    def n_steps(self) -> int:
        return len(self.times)


def time_grid(t0: float, t1: float, dt: float) -> np.ndarray:
    """``t0 + i dt`` up to ``t1`` with the last step shortened to land on ``t1``.

    Nodes are built by multiplication, never by accumulation, so two runs
    with the same ``(t0, dt)`` share their nodes exactly.
    """
    if t1 < t0:
        raise TimeOrder(f"t_final = {t1} precedes t = {t0}")
    if t1 == t0:
        return np.array([t0])
    n = max(1, math.ceil((t1 - t0) / dt - 1e-9))
    nodes = t0 + dt * np.arange(n + 1, dtype=float)
    nodes[-1] = t1
    return nodes


class _Advancer:
    def __init__(self, cfg: StepperConfig, pot: Potential, H: float, N: int):
        self.cfg, self.pot, self.H = cfg, pot, float(H)
        self.st = SpectralStepper(N, H, cfg.dealias) if cfg.method == "strang_exact" else None

    # states are carried as (payload, t) where payload is spectral for strang
    def load(self, z: State):
        return self.st.to_spectral(z) if self.st else (z.u, z.v)

    def unload(self, payload, t) -> State:
        return self.st.to_state(*payload, t) if self.st else State(*payload, t)

    def one(self, payload, t0, t1):
        if self.st:
            return self.st.strang(*payload, t0, t1, self.pot)
        z = _rk4(State(*payload, t0), t1, self.pot, self.H, self.cfg.dealias)
        return z.u, z.v

    def rel_error(self, a, b, t) -> float:
        za, zb = self.unload(a, t), self.unload(b, t)
        q = self.pot.q
        ref = energy_X(zb, q, self.H)
        diff = energy_X(za - zb, q, self.H)
        if ref == 0.0:
            return 0.0 if diff == 0.0 else math.inf
        return math.sqrt(diff / ref)

    def adaptive(self, payload, t0, t1, depth, record):
        """Step doubling; returns the list of accepted ``(payload, t)``."""
        tm = t0 + 0.5 * (t1 - t0)
        coarse = self.one(payload, t0, t1)
        fine = self.one(self.one(payload, t0, tm), tm, t1)
        if self.rel_error(coarse, fine, t1) <= self.cfg.local_error_target:
            return [(fine, t1)]
        record.rejected += 1
        if depth >= self.cfg.max_halvings:
            raise StepUnderflow(f"step at t = {t0} halved {depth} times without meeting the target")
        left = self.adaptive(payload, t0, tm, depth + 1, record)
        right = self.adaptive(left[-1][0], tm, t1, depth + 1, record)
        return left + right


def evolve(
    z: State,
    t_final: float,
    cfg: StepperConfig,
    pot: Potential,
    H: float,
    observer: Optional[Callable[[State], None]] = None,
    keep_states: bool = False,
) -> tuple[State, TrajectoryRecord]:
    """Advance ``z`` to exactly ``t_final``; ``observer`` sees every accepted step."""
    nodes = time_grid(z.t, t_final, cfg.dt)
    record = TrajectoryRecord(states=[] if keep_states else None)
    if len(nodes) == 1:
        return z.copy(), record
    adv = _Advancer(cfg, pot, H, len(z.u))
    payload = adv.load(z)
    current = z
    for t0, t1 in zip(nodes[:-1], nodes[1:]):
        if cfg.adapt:
            accepted = adv.adaptive(payload, t0, t1, 0, record)
        else:
            accepted = [(adv.one(payload, t0, t1), t1)]
        for payload, t in accepted:
            current = _check_finite(adv.unload(payload, t))
            record.times.append(t)
            if keep_states:
                record.states.append(current)
            if observer is not None:
                observer(current)
    return current, record


def apply_process(
    s: float,
    t: float,
    z0: State,
    cfg: StepperConfig,
    pot: Potential,
    H: float,
    observer: Optional[Callable[[State], None]] = None,
) -> State:
    """``S(t, s) z0``."""
    if t < s:
        raise TimeOrder(f"t = {t} precedes s = {s}")
    start = State(z0.u, z0.v, s)
    return evolve(start, t, cfg, pot, H, observer)[0]
