"""Independent reference solvers for cross-checking.

Nothing in the production paths calls these: they share no stepping code
with :mod:`oscillon.dynamics`.  ``fd_solve`` replaces the spectral Laplacian
by the second-order periodic stencil and integrates with classical RK4;
``mode_ode_solve`` hands a single Fourier mode of the linear equation to an
adaptive embedded Runge-Kutta integrator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import CflViolation, NonFinite, StepUnderflow
from .potential import Potential
from .spectral import State, resample

__all__ = ["FdGrid", "fd_solve", "mode_ode_solve"]


@dataclass(frozen=True)
class FdGrid:
    M: int

    def __post_init__(self):
        if self.M < 8:
            raise ValueError(f"FD grid needs M >= 8, got {self.M}")

    @property
    def dx(self) -> float:
        return 1.0 / self.M

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        return (np.roll(u, -1) - 2.0 * u + np.roll(u, 1)) / self.dx**2


def fd_solve(z0: State, s: float, t: float, pot: Potential, H: float, M: int, dt: float) -> State:
    """Integrate from ``s`` to ``t`` on an ``M``-point finite-difference grid
    and return the end state resampled to the grid of ``z0``.

    The explicit scheme needs ``dt <= dx e^(H s)`` (the fastest wave speed
    on the interval is ``e^(-H s)``).
    """
    g = FdGrid(M)
    limit = g.dx * math.exp(H * s)
    if dt > limit:
        raise CflViolation(f"fd_solve needs dt <= {limit:.3g}, got {dt:.3g}")
    N = len(z0.u)
    u, v = resample(z0.u, M), resample(z0.v, M)
    n = max(1, math.ceil((t - s) / dt - 1e-9))
    h = (t - s) / n

    def f(u, v, tau):
        acc = -H * v + math.exp(-2.0 * H * tau) * g.laplacian(u)
        if not pot.is_linear:
            acc = acc - pot.phi(u)
        return v, acc

    for i in range(n):
        tau = s + i * h
        k1u, k1v = f(u, v, tau)
        k2u, k2v = f(u + 0.5 * h * k1u, v + 0.5 * h * k1v, tau + 0.5 * h)
        k3u, k3v = f(u + 0.5 * h * k2u, v + 0.5 * h * k2v, tau + 0.5 * h)
        k4u, k4v = f(u + h * k3u, v + h * k3v, tau + h)
        u = u + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    if not (np.isfinite(u).all() and np.isfinite(v).all()):
        raise NonFinite("fd_solve produced non-finite values")
    return State(resample(u, N), resample(v, N), t)


def mode_ode_solve(k: int, z_k, s: float, t: float, H: float, tol: float = 1e-12):
    """Solve ``u'' + H u' + e^(-2Ht) (2 pi k)^2 u = 0`` from ``(u, v) = z_k``.

    Complex coefficients are integrated as two real problems.  Returns the
    pair ``(u_k(t), v_k(t))``.
    """
    if tol < 1e-13:
        raise ValueError("tol must be >= 1e-13")
    u0, v0 = complex(z_k[0]), complex(z_k[1])
    w2 = (2.0 * math.pi * k) ** 2
    if t == s:
        return _pack(u0, v0, z_k)

    def f(tau, y):
        return [y[1], -H * y[1] - math.exp(-2.0 * H * tau) * w2 * y[0]]

    out = []
    for part in (lambda c: c.real, lambda c: c.imag):
        y0 = [part(u0), part(v0)]
        if y0 == [0.0, 0.0]:
            out.append((0.0, 0.0))
            continue
        scale = max(abs(y0[0]), abs(y0[1]), 1e-300)
        sol = solve_ivp(f, (s, t), y0, method="DOP853", rtol=tol, atol=tol * scale * 1e-2)
        if sol.status != 0:
            raise StepUnderflow(f"mode {k}: {sol.message}")
        out.append((sol.y[0, -1], sol.y[1, -1]))
    u1 = out[0][0] + 1j * out[1][0]
    v1 = out[0][1] + 1j * out[1][1]
    return _pack(u1, v1, z_k)


def _pack(u, v, like):
    if all(isinstance(c, (int, float, np.floating)) for c in like):
        return float(u.real), float(v.real)
    return u, v
