"""Experiment drivers: pullback decay, absorber entry, forward decay, the
P/N decomposition and box counting on sampled end states."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .diagnostics import row as diag_row
from .dynamics import SpectralStepper, StepperConfig, evolve, time_grid
from .errors import (
    AbsorberViolation,
    DegenerateCloud,
    InsufficientDecades,
    NonFinite,
)
from .potential import (
    GrowthCertificate,
    Potential,
    RateConstants,
    derive_constants,
    star_potential,
)
from .spectral import Grid, State, energy_X, h1_seminorm, norm_Yt

__all__ = [
    "thermal_state",
    "PullbackRun",
    "RunResult",
    "DecayReport",
    "DecayFit",
    "PullbackRow",
    "ForwardReport",
    "AbsorberReport",
    "DecompositionReport",
    "DimensionEstimate",
    "run_family",
    "dissipative_check",
    "decay_fit",
    "pullback_convergence",
    "absorber_entry",
    "forward_decay_check",
    "decomposition_run",
    "decomposition_sweep",
    "box_dimension_estimate",
    "default_s_grid",
]

NOISE_FLOOR = 1e-24


# --- initial data -------------------------------------------------------------

def thermal_state(
    grid: Grid,
    seed: int,
    energy: float,
    t: float,
    H: float,
    q: int,
    k0: float = 4.0,
    mean_fraction: float = 0.0,
    v_fraction: float = 0.5,
) -> State:
    """Seeded random Fourier data under the envelope ``exp(-(k/k0)^2)``,
    rescaled so that ``E_{X_t} = energy``.

    ``v`` carries ``v_fraction`` of the energy and ``u`` the rest.  Of the
    ``u`` share, ``mean_fraction`` sits in the constant mode (whose dynamics
    do not feel the time-dependent wave speed); the default is zero mean.
    The Nyquist mode is left empty.
    """
    N = grid.N
    if energy < 0:
        raise ValueError("energy must be >= 0")
    if not 0 <= mean_fraction < 1 or not 0 <= v_fraction <= 1:
        raise ValueError("need 0 <= mean_fraction < 1 and 0 <= v_fraction <= 1")
    if energy == 0:
        return State.zeros(grid, t)
    rng = np.random.default_rng(seed)
    k = np.arange(N // 2 + 1)
    env = np.exp(-((k / k0) ** 2))
    env[0] = 0.0
    env[-1] = 0.0

    def shape():
        c = (rng.standard_normal(len(k)) + 1j * rng.standard_normal(len(k))) * env
        return np.fft.irfft(c * N, n=N)

    u_shape = shape()
    v_shape = shape()
    zero = np.zeros(N)
    f = v_fraction
    v = zero
    if f > 0:
        v = math.sqrt(f * energy / energy_X(State(zero, v_shape, t), q, H)) * v_shape

    target = (1.0 - f) * energy
    if target <= 0:
        return State(zero, v, t)
    m = 0.0
    if mean_fraction > 0:
        m = brentq(lambda c: (2.0 / q) * c**q + c * c - mean_fraction * target,
                   0.0, math.sqrt(target) + 1.0, xtol=1e-300, rtol=1e-15)

    def g(a):
        return energy_X(State(m + a * u_shape, zero, t), q, H) - target

    hi = 1.0
    while g(hi) < 0:
        hi *= 2.0
    a = brentq(g, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=400)
    return State(m + a * u_shape, v, t)


def default_s_grid(t: float, imax: int = 12) -> list:
    """``t - 2^i`` for ``i = 0 .. imax``."""
    return [t - 2.0**i for i in range(imax + 1)]


# --- running families ---------------------------------------------------------

@dataclass(frozen=True)
class PullbackRun:
    """Target time ``t``, start times ``s_list`` and a seeded family of data
    normalised to ``E_{X_s} = R``."""

    pot: Potential
    H: float
    t: float
    s_list: tuple
    R: float
    N: int = 64
    seeds: tuple = (0,)
    k0: float = 4.0
    mean_fraction: float = 0.0
    v_fraction: float = 0.5
    cfg: StepperConfig = StepperConfig(dt=0.01)
    trace: bool = True  # record E_{X_t} and |v|^2 at every step

    def __post_init__(self):
        object.__setattr__(self, "s_list", tuple(float(s) for s in self.s_list))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if any(s > self.t for s in self.s_list):
            raise ValueError("every start time must be <= t")

    def initial(self, s: float, seed: int) -> State:
        z = thermal_state(
            Grid(self.N), seed, self.R, s, self.H, self.pot.q,
            self.k0, self.mean_fraction, self.v_fraction,
        )
        E = energy_X(z, self.pot.q, self.H)
        if E > self.R * (1 + 1e-9):
            raise ValueError(f"initial energy {E} exceeds R = {self.R}")
        return z


@dataclass
class RunResult:
    s: float
    seed: int
    E_start: float
    end: State
    times: np.ndarray
    energies: np.ndarray
    vL2sq: np.ndarray
    Phi_start: float


def _one_run(args) -> RunResult:
    run, s, seed = args
    z = run.initial(s, seed)
    q, H = run.pot.q, run.H
    times, energies, vsq = [], [], []

    def watch(state):
        times.append(state.t)
        energies.append(energy_X(state, q, H))
        vsq.append(float(np.mean(state.v**2)))

    phi0 = diag_row(z, None, run.pot, H).Phi
    end, _ = evolve(z, run.t, run.cfg, run.pot, H, watch if run.trace else None)
    return RunResult(
        s=s, seed=seed, E_start=energy_X(z, q, H), end=end,
        times=np.array(times), energies=np.array(energies), vL2sq=np.array(vsq),
        Phi_start=phi0,
    )


def run_family(run: PullbackRun, threads: int = 1) -> list:
    """Every (s, seed) pair; results in the order of ``s_list`` then ``seeds``."""
    jobs = [(run, s, seed) for s in run.s_list for seed in run.seeds]
    if threads <= 1 or len(jobs) == 1:
        return [_one_run(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_one_run, jobs))


# --- dissipative estimate and pullback decay -----------------------------------

@dataclass
class DecayReport:
    s: list
    seeds: list
    t: float
    E_start: list
    E_end: list
    violations: list  # signed; <= 0 means the bound holds
    rate: Optional[float] = None

    @property
    def max_violation(self) -> float:
        return max(self.violations) if self.violations else -math.inf


def _bound(consts: RateConstants, E_s: float, elapsed) -> np.ndarray:
    return float(consts.K0) * E_s * np.exp(-float(consts.mu) * np.asarray(elapsed)) + float(consts.K1)


def dissipative_check(
    run: PullbackRun, consts: RateConstants, results: Optional[list] = None, threads: int = 1
) -> DecayReport:
    """Largest ``E_{X_t}(S(t,s)z) - [K0 E_{X_s}(z) e^(-mu(t-s)) + K1]`` over
    the recorded times of every run."""
    results = results if results is not None else run_family(run, threads)
    viol = []
    for r in results:
        if len(r.times):
            v = float(np.max(r.energies - _bound(consts, r.E_start, r.times - r.s)))
        else:
            v = r.E_start - float(_bound(consts, r.E_start, 0.0))
        viol.append(v)
    return DecayReport(
        s=[r.s for r in results], seeds=[r.seed for r in results], t=run.t,
        E_start=[r.E_start for r in results],
        E_end=[energy_X(r.end, run.pot.q, run.H) for r in results],
        violations=viol,
    )


@dataclass(frozen=True)
class DecayFit:
    rate: float
    mu: Optional[float]
    decades: float

    @property
    def margin(self) -> Optional[float]:
        return None if self.mu is None else self.rate - self.mu


def _gradient_energy(z: State, H: float) -> float:
    return math.exp(-2.0 * H * z.t) * h1_seminorm(z.u) ** 2


def decay_fit(
    run: PullbackRun,
    consts: Optional[RateConstants],
    results: Optional[list] = None,
    quantity: str = "E_Xt",
    threads: int = 1,
) -> DecayFit:
    """Least-squares rate of ``log E(end)`` against ``t - s``.

    ``quantity`` is ``"E_Xt"`` or ``"gradient"`` (``e^(-2Ht)|A^(1/2)u|^2``,
    the part that decays even for the linear equation).
    """
    results = results if results is not None else run_family(run, threads)
    el, val = [], []
    for r in results:
        E = energy_X(r.end, run.pot.q, run.H) if quantity == "E_Xt" else _gradient_energy(r.end, run.H)
        el.append(run.t - r.s)
        val.append(E)
    el, val = np.array(el), np.array(val)
    ok = val > NOISE_FLOOR
    if ok.sum() < 2:
        raise InsufficientDecades("fewer than two end energies above the noise floor")
    decades = float(np.log10(val[ok].max() / val[ok].min()))
    if decades < 3:
        raise InsufficientDecades(f"only {decades:.2f} decades of decay above the noise floor")
    slope = np.polyfit(el[ok], np.log(val[ok]), 1)[0]
    mu = float(consts.mu) if consts is not None else None
    return DecayFit(rate=float(-slope), mu=mu, decades=decades)


@dataclass(frozen=True)
class PullbackRow:
    s: float
    t: float
    E_end: float
    dist_prev: float
    bound_rhs: float
    violation: float


def pullback_convergence(
    run: PullbackRun,
    consts: Optional[RateConstants] = None,
    results: Optional[list] = None,
    threads: int = 1,
    burn_in: int = 2,
) -> tuple[list, bool]:
    """Cauchy table ``d_i = E_{X_t}(end_i - end_{i-1})`` along ``s_list``
    (first seed only).  Returns the rows and whether ``d_i`` is nonincreasing
    after ``burn_in`` entries."""
    if results is None:
        single = replace(run, seeds=run.seeds[:1])
        results = run_family(single, threads)
    q, H = run.pot.q, run.H
    rows, prev, dists = [], None, []
    for r in results:
        E_end = energy_X(r.end, q, H)
        d = math.nan if prev is None else energy_X(r.end - prev, q, H)
        if consts is not None:
            rhs = float(_bound(consts, r.E_start, run.t - r.s))
        else:
            rhs = math.nan
        rows.append(PullbackRow(r.s, run.t, E_end, d, rhs, E_end - rhs))
        if prev is not None:
            dists.append(d)
        prev = r.end
    tail = dists[burn_in:]
    monotone = all(b <= a * (1 + 1e-9) + 1e-300 for a, b in zip(tail, tail[1:]))
    return rows, monotone


# --- absorber -----------------------------------------------------------------

@dataclass(frozen=True)
class AbsorberReport:
    R_start: float
    R_A: float
    horizon: float
    entry_time: Optional[float]  # elapsed t - s at first entry

    @property
    def entered(self) -> bool:
        return self.entry_time is not None and self.entry_time <= 1.1 * self.horizon


class _Entered(Exception):
    pass


def absorber_entry(
    pot: Potential,
    consts: RateConstants,
    seed: int,
    factor: float = 100.0,
    s: float = 0.0,
    N: int = 64,
    k0: float = 4.0,
    cfg: StepperConfig = StepperConfig(dt=0.01),
) -> AbsorberReport:
    """Start at ``E_{X_s} = factor * R_A`` and report the first elapsed time
    with ``E_{X_t} <= R_A``, searching up to 1.1 times the predicted horizon."""
    H, q = float(consts.H), pot.q
    R_A = float(consts.R_A)
    R = factor * R_A
    horizon = consts.horizon(R)
    z = thermal_state(Grid(N), seed, R, s, H, q, k0)
    hit = []

    def watch(state):
        if energy_X(state, q, H) <= R_A:
            hit.append(state.t - s)
            raise _Entered

    if energy_X(z, q, H) <= R_A:
        return AbsorberReport(R, R_A, horizon, 0.0)
    try:
        evolve(z, s + 1.1 * horizon, cfg, pot, H, watch)
    except _Entered:
        pass
    return AbsorberReport(R, R_A, horizon, hit[0] if hit else None)


# --- forward decay ------------------------------------------------------------

@dataclass
class ForwardReport:
    times: np.ndarray
    vL2sq: np.ndarray
    bound: np.ndarray

    @property
    def violations(self) -> np.ndarray:
        return self.vL2sq - self.bound

    @property
    def max_violation(self) -> float:
        return float(np.max(self.violations)) if len(self.times) else -math.inf


def forward_bound(Phi_s: float, b1: float, H: float, elapsed) -> np.ndarray:
    """``(Phi(s) + 2 b1) max{1, 1/(2H(t-s))}``."""
    elapsed = np.asarray(elapsed, dtype=float)
    with np.errstate(divide="ignore"):
        factor = np.maximum(1.0, 1.0 / (2.0 * H * elapsed))
    return (Phi_s + 2.0 * b1) * factor


def forward_decay_check(
    s: float,
    z: State,
    t_final: float,
    consts: RateConstants,
    pot: Potential,
    cfg: StepperConfig = StepperConfig(dt=0.01),
) -> ForwardReport:
    """``|v(t)|^2`` against the sharpened forward bound at every step."""
    H = float(consts.H)
    z = State(z.u, z.v, s)
    Phi_s = diag_row(z, consts, pot).Phi
    times, vsq = [], []

    def watch(state):
        times.append(state.t)
        vsq.append(float(np.mean(state.v**2)))

    evolve(z, t_final, cfg, pot, H, watch)
    times = np.array(times)
    return ForwardReport(times, np.array(vsq), forward_bound(Phi_s, float(consts.b1), H, times - s))


# --- decomposition u = p + n ------------------------------------------------------

@dataclass
class DecompositionReport:
    s: float
    t: float
    times: np.ndarray
    reconstruction: np.ndarray  # E_{X_t}^(1/2)(u - p - n)
    P_energy: np.ndarray
    P_bound: np.ndarray
    N_ratio: np.ndarray  # ||n||^2_{Y_t} / (1 + e^(qHt))
    K2: float
    mu1: float
    p_end: Optional[State] = None

    @property
    def max_reconstruction(self) -> float:
        return float(np.max(self.reconstruction)) if len(self.times) else 0.0

    @property
    def P_max_violation(self) -> float:
        return float(np.max(self.P_energy - self.P_bound)) if len(self.times) else -math.inf

    @property
    def N_sup(self) -> float:
        return float(np.max(self.N_ratio)) if len(self.times) else 0.0

    @property
    def N_end(self) -> float:
        return float(self.N_ratio[-1]) if len(self.times) else 0.0


def decomposition_run(
    s: float,
    z: State,
    t: float,
    pot: Potential,
    cert: GrowthCertificate,
    consts: RateConstants,
    dt: float = 0.01,
    dealias: bool = False,
) -> DecompositionReport:
    """Run ``u`` (with phi), ``p`` (with phi_star, same data) and ``n``
    (zero data, forced by ``phi_star(p) - phi(u)``) in lockstep on one time
    grid with identical Strang kicks."""
    H, q = float(consts.H), cert.q
    z = State(z.u, z.v, s)
    E0 = energy_X(z, q, H)
    R_A = float(consts.R_A)
    if E0 > R_A * (1 + 1e-12):
        raise AbsorberViolation(f"E_X(s) = {E0} exceeds R_A = {R_A}")
    star, star_cert = star_potential(q)
    star_consts = derive_constants(star, star_cert, H)
    K2, mu1 = float(star_consts.K0), float(star_consts.mu)

    N = len(z.u)
    st = SpectralStepper(N, H, dealias)
    uh, uvh = st.to_spectral(z)
    ph, pvh = uh.copy(), uvh.copy()
    nh, nvh = np.zeros_like(uh), np.zeros_like(uvh)

    def kick(h):
        nonlocal uvh, pvh, nvh
        fu = st.force(uh, pot)
        fp = st.force(ph, star)
        uvh = uvh - h * fu
        pvh = pvh - h * fp
        nvh = nvh - h * (fu - fp)

    nodes = time_grid(s, t, dt)
    times, rec, Pe, Nr = [], [], [], []
    for t0, t1 in zip(nodes[:-1], nodes[1:]):
        h = 0.5 * (t1 - t0)
        kick(h)
        uh, uvh = st.prop.advance(uh, uvh, t0, t1)
        ph, pvh = st.prop.advance(ph, pvh, t0, t1)
        nh, nvh = st.prop.advance(nh, nvh, t0, t1)
        kick(h)
        zu, zp, zn = st.to_state(uh, uvh, t1), st.to_state(ph, pvh, t1), st.to_state(nh, nvh, t1)
        if not (zu.is_finite() and zp.is_finite() and zn.is_finite()):
            raise NonFinite(f"non-finite sample at t = {t1}")
        times.append(t1)
        rec.append(math.sqrt(energy_X(zu - zp - zn, q, H)))
        Pe.append(energy_X(zp, q, H))
        Nr.append(norm_Yt(zn, q, H) ** 2 / (1.0 + math.exp(q * H * t1)))
    times = np.array(times)
    return DecompositionReport(
        s=s, t=t, times=times, reconstruction=np.array(rec),
        P_energy=np.array(Pe), P_bound=K2 * R_A * np.exp(-mu1 * (times - s)),
        N_ratio=np.array(Nr), K2=K2, mu1=mu1,
        p_end=st.to_state(ph, pvh, t) if len(times) else z,
    )


def _decomp_job(args):
    s, t, pot, cert, consts, N, seed, fill, k0, mean_fraction, dt = args
    z = thermal_state(
        Grid(N), seed, fill * float(consts.R_A), s, float(consts.H), cert.q, k0, mean_fraction
    )
    return decomposition_run(s, z, t, pot, cert, consts, dt)


def decomposition_sweep(
    t: float,
    s_values: Sequence[float],
    pot: Potential,
    cert: GrowthCertificate,
    consts: RateConstants,
    N: int = 64,
    seed: int = 0,
    fill: float = 0.9,
    k0: float = 4.0,
    mean_fraction: float = 0.5,
    dt: float = 0.01,
    threads: int = 1,
) -> list:
    """One decomposition per start time, data filling ``fill * R_A`` with
    ``mean_fraction`` of the displacement energy in the constant mode."""
    jobs = [(s, t, pot, cert, consts, N, seed, fill, k0, mean_fraction, dt) for s in s_values]
    if threads <= 1:
        return [_decomp_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_decomp_job, jobs))


# --- box counting -------------------------------------------------------------

@dataclass(frozen=True)
class DimensionEstimate:
    dimension: float
    eps: np.ndarray
    counts: np.ndarray
    window: np.ndarray  # mask of eps values used in the fit
    diameter: float


def _truncate(f: np.ndarray, M: Optional[int]) -> np.ndarray:
    if M is None:
        return f
    N = len(f)
    fh = np.fft.rfft(f)
    fh[M + 1:] = 0.0
    return np.fft.irfft(fh, n=N)


def _distance_matrix(points, q, H, M) -> np.ndarray:
    if isinstance(points, np.ndarray) and points.ndim == 2:
        X = points.astype(float)
        sq = np.sum(X**2, axis=1)
        D2 = np.maximum(sq[:, None] + sq[None, :] - 2 * X @ X.T, 0.0)
        D = np.sqrt(D2)
        np.fill_diagonal(D, 0.0)
        return D
    states = [State(_truncate(z.u, M), _truncate(z.v, M), z.t) for z in points]
    n = len(states)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = math.sqrt(energy_X(states[i] - states[j], q, H))
    return D


def _canonical_order(points) -> np.ndarray:
    if isinstance(points, np.ndarray) and points.ndim == 2:
        X = points
    else:
        X = np.array([np.concatenate([z.u, z.v]) for z in points])
    return np.lexsort(X.T[::-1])


def _greedy_cover(D: np.ndarray, eps: float) -> int:
    n = len(D)
    covered = np.zeros(n, dtype=bool)
    count = 0
    for i in range(n):
        if not covered[i]:
            covered |= D[i] <= eps
            count += 1
    return count


def box_dimension_estimate(
    points,
    eps_grid: Sequence[float],
    q: int = 2,
    H: float = 1.0,
    M: Optional[int] = None,
    min_points: int = 100,
) -> DimensionEstimate:
    """Slope of ``log N_eps`` against ``log(1/eps)`` from greedy eps-covers.

    ``points`` is either an ``(n, d)`` array (Euclidean metric) or a list of
    States, compared in ``E_{X_t}^(1/2)`` after truncation to the mean plus
    the first ``M`` modes.  The cover is built in a canonical point order,
    so the result does not depend on how the input is labelled.

    A cloud whose diameter does not exceed the smallest eps is one box at
    every scale and has dimension 0.  A diameter within a decade of the
    smallest eps leaves no scaling range and raises DegenerateCloud.
    """
    n = len(points)
    if n < min_points:
        raise DegenerateCloud(f"need at least {min_points} points, got {n}")
    eps = np.sort(np.asarray(eps_grid, dtype=float))
    order = _canonical_order(points)
    pts = points[order] if isinstance(points, np.ndarray) else [points[i] for i in order]
    D = _distance_matrix(pts, q, H, M)
    diam = float(D.max())
    counts = np.array([_greedy_cover(D, e) for e in eps])
    if diam <= eps[0]:
        return DimensionEstimate(0.0, eps, counts, np.ones(len(eps), bool), diam)
    if diam < 10 * eps[0]:
        raise DegenerateCloud(f"diameter {diam:.3g} < 10 * eps_min = {10 * eps[0]:.3g}")
    # scaling window: away from both saturation (every point its own box)
    # and the single-box regime
    window = (counts >= 2) & (counts <= n / 5) & (eps < diam / 2)
    if window.sum() < 3:
        raise DegenerateCloud("fewer than three eps values inside the scaling window")
    slope = np.polyfit(np.log(1.0 / eps[window]), np.log(counts[window]), 1)[0]
    return DimensionEstimate(float(slope), eps, counts, window, diam)
