"""Scalar functionals, energy densities and discrete energy-identity residuals."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ZeroEnergy
from .potential import Potential, RateConstants
from .spectral import State, energy_X, transform

__all__ = [
    "DiagnosticsRow",
    "EnergyDensityFrame",
    "ROW_FIELDS",
    "row",
    "hamiltonian_total",
    "energy_density",
    "localization_metric",
    "identity_residual",
    "Recorder",
]

ROW_FIELDS = (
    "t", "E_Xt", "E_mech", "V_total", "Phi", "Lambda1", "Ham_total", "vL2sq", "identity_residual",
)


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    E_Xt: float
    E_mech: float
    V_total: float
    Phi: float
    Lambda1: float
    Ham_total: float
    vL2sq: float
    identity_residual: float = 0.0

    def values(self) -> tuple:
        return tuple(getattr(self, f) for f in ROW_FIELDS)

    def with_residual(self, r: float) -> "DiagnosticsRow":
        d = asdict(self)
        d["identity_residual"] = r
        return DiagnosticsRow(**d)


@dataclass(frozen=True)
class EnergyDensityFrame:
    t: float
    x: np.ndarray
    density: np.ndarray

    def integral(self) -> float:
        return float(np.mean(self.density))


def _quadratic_parts(z: State):
    """|A^(1/2)u|^2, |u|^2, |v|^2 by Parseval."""
    N = len(z.u)
    su, sv = transform(z.u), transform(z.v)
    w = np.full(N // 2 + 1, 2.0)
    w[0] = w[-1] = 1.0
    om2 = (2.0 * np.pi * np.arange(N // 2 + 1)) ** 2
    grad = float(np.sum(w * om2 * np.abs(su) ** 2))
    u2 = float(np.sum(w * np.abs(su) ** 2))
    v2 = float(np.sum(w * np.abs(sv) ** 2))
    return grad, u2, v2


def row(
    z: State,
    consts: Optional[RateConstants],
    pot: Potential,
    H: Optional[float] = None,
) -> DiagnosticsRow:
    """All functionals of one state.

    ``consts`` supplies H and nu.  For the linear potential there are no
    constants; pass ``H`` and Lambda1 is then evaluated with nu = 0.
    """
    if consts is not None:
        H, nu = float(consts.H), float(consts.nu)
    elif H is None:
        raise ValueError("need either rate constants or H")
    else:
        nu = 0.0
    H = float(H)
    grad, u2, v2 = _quadratic_parts(z)
    decay = math.exp(-2.0 * H * z.t)
    V_total = float(np.mean(pot.V(z.u))) if not pot.is_linear else 0.0
    E_mech = decay * grad + v2
    Phi = E_mech + 2.0 * V_total
    Lambda1 = Phi + nu * (H * u2 + 2.0 * float(np.mean(z.u * z.v)))
    return DiagnosticsRow(
        t=z.t,
        E_Xt=energy_X(z, pot.q, H),
        E_mech=E_mech,
        V_total=V_total,
        Phi=Phi,
        Lambda1=Lambda1,
        Ham_total=hamiltonian_total(z, pot, H),
        vL2sq=v2,
    )


def hamiltonian_total(z: State, pot: Potential, H: float, literal: bool = False) -> float:
    """Integral of ``(1/2) e^(-Ht) ((u_x)^2 + pi^2) + e^(Ht) V(u)``.

    The momentum is ``pi = e^(Ht) u_t``, the choice compatible with the
    canonical equation ``u_t = dH/dpi``.  ``literal=True`` evaluates the
    printed form ``pi = e^(Ht) u`` instead, for comparison.
    """
    grad, u2, v2 = _quadratic_parts(z)
    V_total = float(np.mean(pot.V(z.u))) if not pot.is_linear else 0.0
    mom2 = math.exp(2.0 * H * z.t) * (u2 if literal else v2)
    return 0.5 * math.exp(-H * z.t) * (grad + mom2) + math.exp(H * z.t) * V_total


def energy_density(z: State, pot: Potential, H: float) -> EnergyDensityFrame:
    """``e(x) = (1/2) e^(-2Ht) u_x^2 + (1/2) v^2 + V(u)`` on the nodes.

    ``u_x`` is the spectral derivative; the Nyquist mode has no well-defined
    derivative on the grid and is left out of it.
    """
    N = len(z.u)
    uh = np.fft.rfft(z.u)
    dh = 1j * 2.0 * np.pi * np.arange(N // 2 + 1) * uh
    dh[-1] = 0.0
    ux = np.fft.irfft(dh, n=N)
    dens = 0.5 * math.exp(-2.0 * H * z.t) * ux**2 + 0.5 * z.v**2
    if not pot.is_linear:
        dens = dens + pot.V(z.u)
    return EnergyDensityFrame(z.t, np.arange(N) / N, dens)


def localization_metric(frame: EnergyDensityFrame) -> float:
    """Peak-to-mean ratio of the energy density (1 when uniform)."""
    m = float(np.mean(frame.density))
    if not m > 0:
        raise ZeroEnergy(f"mean energy density {m} at t = {frame.t}")
    return float(np.max(frame.density)) / m


def identity_residual(prev: DiagnosticsRow, nxt: DiagnosticsRow, H: float) -> float:
    """``|dPhi/dt + 2H E_mech|`` with a forward difference and trapezoidal
    average of ``E_mech`` over the step."""
    dt = nxt.t - prev.t
    if dt == 0:
        return 0.0
    return abs((nxt.Phi - prev.Phi) / dt + H * (prev.E_mech + nxt.E_mech))


@dataclass
class Recorder:
    """Observer for :func:`oscillon.dynamics.evolve` collecting rows and
    density snapshots.  Call :meth:`start` with the initial state first; it
    is used only as the reference for the first residual."""

    pot: Potential
    consts: Optional[RateConstants]
    H: float
    snapshot_stride: int = 0
    rows: list = field(default_factory=list)
    frames: list = field(default_factory=list)
    initial: Optional[DiagnosticsRow] = None
    _steps: int = 0

    def start(self, z: State) -> "Recorder":
        self.initial = row(z, self.consts, self.pot, self.H)
        return self

    def __call__(self, z: State) -> None:
        r = row(z, self.consts, self.pot, self.H)
        prev = self.rows[-1] if self.rows else self.initial
        if prev is not None:
            r = r.with_residual(identity_residual(prev, r, self.H))
        self.rows.append(r)
        self._steps += 1
        if self.snapshot_stride and self._steps % self.snapshot_stride == 0:
            self.frames.append(energy_density(z, self.pot, self.H))
