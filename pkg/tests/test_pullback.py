import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscillon.dynamics import StepperConfig, evolve
from oscillon.errors import AbsorberViolation, DegenerateCloud, InsufficientDecades
from oscillon.potential import builtin, derive_constants, star_potential
from oscillon.pullback import (
    PullbackRun,
    absorber_entry,
    box_dimension_estimate,
    decay_fit,
    decomposition_run,
    default_s_grid,
    dissipative_check,
    forward_decay_check,
    pullback_convergence,
    run_family,
    thermal_state,
)
from oscillon.spectral import Grid, State, energy_X

CFG = StepperConfig(dt=0.02)


def _setup(name, alpha=None, H=1):
    pot, cert = builtin(name, alpha)
    return pot, cert, derive_constants(pot, cert, H)


# --- initial data -------------------------------------------------------------

def test_thermal_state_energy_and_determinism():
    g = Grid(64)
    a = thermal_state(g, 5, 3.0, -2.0, 0.5, 6, mean_fraction=0.4)
    b = thermal_state(g, 5, 3.0, -2.0, 0.5, 6, mean_fraction=0.4)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
    assert energy_X(a, 6, 0.5) == pytest.approx(3.0, rel=1e-12)
    assert np.mean(a.u) > 0
    z = thermal_state(g, 5, 0.0, 0.0, 1.0, 6)
    assert not z.u.any() and not z.v.any()


def test_default_s_grid():
    assert default_s_grid(0.0, 3) == [-1.0, -2.0, -4.0, -8.0]


def test_pullback_run_rejects_future_start():
    pot, _, _ = _setup("Vplus")
    with pytest.raises(ValueError):
        PullbackRun(pot, 1.0, 0.0, (1.0,), 1.0)


# --- dissipative estimate ------------------------------------------------------

def test_dissipative_origin():
    pot, _, c = _setup("Vplus")
    run = PullbackRun(pot, 1.0, 0.0, (-2.0,), 0.0, N=32, cfg=CFG)
    rep = dissipative_check(run, c)
    assert rep.E_end == [0.0] and rep.max_violation <= 0


@pytest.mark.parametrize("name,alpha", [("Vplus", None), ("Valpha_minus", 0.4)])
def test_dissipative_bound_holds(name, alpha):
    pot, _, c = _setup(name, alpha)
    run = PullbackRun(pot, 1.0, 0.0, (-1.0, -4.0), 5.0, N=32, seeds=(0, 1), cfg=CFG)
    rep = dissipative_check(run, c)
    assert rep.max_violation <= 0
    if name == "Valpha_minus":
        assert float(c.K1) > 0


# --- decay fit ---------------------------------------------------------------

def test_decay_fit_vplus_beats_mu():
    pot, _, c = _setup("Vplus")
    run = PullbackRun(pot, 1.0, 0.0, tuple(-float(i) for i in range(1, 9)), 1.0, N=32, cfg=CFG)
    fit = decay_fit(run, c)
    assert fit.decades >= 3 and fit.margin > 0


def test_decay_fit_linear_gradient_rate():
    # e^(-2Ht)|A^(1/2)u|^2 falls like e^(-2H(t-s)) while |A^(1/2)u| levels off
    pot, _ = builtin("Vzero")
    H = 1.0
    run = PullbackRun(pot, H, 0.0, tuple(-float(i) for i in range(4, 11)), 1.0, N=32,
                      v_fraction=0.0, cfg=CFG)
    fit = decay_fit(run, None, quantity="gradient")
    assert fit.rate == pytest.approx(2 * H, rel=0.05)


def test_decay_fit_origin_rejected():
    pot, _, c = _setup("Vplus")
    run = PullbackRun(pot, 1.0, 0.0, (-1.0, -2.0), 0.0, N=32, cfg=CFG)
    with pytest.raises(InsufficientDecades):
        decay_fit(run, c)


# --- pullback convergence --------------------------------------------------------

def test_pullback_vplus_to_zero():
    pot, _, c = _setup("Vplus")
    run = PullbackRun(pot, 1.0, 0.0, default_s_grid(0.0, 4), 1.0, N=32, cfg=CFG)
    rows, monotone = pullback_convergence(run, c)
    assert monotone
    assert rows[-1].E_end < 1e-10 and rows[-1].dist_prev < 1e-6
    ends = [r.E_end for r in rows]
    assert all(b <= a for a, b in zip(ends[2:], ends[3:]))


def test_pullback_linear_nonzero_limit():
    # oscillating modes are flattened, but the mean of u is a free direction
    # of the linear equation: end states settle on a nonzero constant
    pot, _ = builtin("Vzero")
    run = PullbackRun(pot, 1.0, 0.0, (-2.0, -4.0, -6.0, -8.0), 1.0, N=32,
                      mean_fraction=0.5, v_fraction=0.0, cfg=CFG)
    rows, _ = pullback_convergence(run, None)
    end = run_family(PullbackRun(pot, 1.0, 0.0, (-8.0,), 1.0, N=32, mean_fraction=0.5,
                                 v_fraction=0.0, cfg=CFG))[0].end
    assert abs(np.mean(end.u)) > 0.1
    assert np.ptp(end.u) < 1e-3 * abs(np.mean(end.u))
    d = [r.dist_prev for r in rows[1:]]
    assert d[-1] < 1e-3 * d[0]


def test_pullback_repeated_start_time():
    pot, _, c = _setup("Vminus")
    run = PullbackRun(pot, 1.0, 0.0, (-1.5, -1.5), 1.0, N=32, cfg=CFG)
    rows, _ = pullback_convergence(run, c)
    assert rows[1].dist_prev == 0


# --- absorber -----------------------------------------------------------------

@pytest.mark.parametrize("name,alpha", [("Vplus", None), ("Valpha_minus", 0.4)])
def test_absorber_entry(name, alpha):
    pot, _, c = _setup(name, alpha)
    rep = absorber_entry(pot, c, seed=3, N=32, cfg=StepperConfig(dt=0.01))
    assert rep.entered and rep.entry_time > 0


# --- forward decay --------------------------------------------------------------

def test_forward_origin():
    pot, _, c = _setup("Vminus")
    rep = forward_decay_check(0.0, State.zeros(Grid(32)), 2.0, c, pot, CFG)
    assert np.all(rep.vL2sq == 0) and rep.max_violation <= 0


@pytest.mark.parametrize("name,alpha", [("Vminus", None), ("Valpha_minus", 0.4)])
def test_forward_bound(name, alpha):
    pot, _, c = _setup(name, alpha)
    z = thermal_state(Grid(32), 2, 4.0, 0.0, 1.0, 6)
    rep = forward_decay_check(0.0, z, 50.0, c, pot, StepperConfig(dt=0.05))
    assert rep.max_violation <= 0
    late = rep.times > 10
    if name == "Valpha_minus":
        assert float(c.b1) > 0
    # non-vacuous: the bound stays within a few orders of |v|^2 somewhere late
    assert np.min(rep.bound[late] / np.maximum(rep.vL2sq[late], 1e-300)) < 1e6


# --- decomposition ---------------------------------------------------------------

def test_decomposition_origin():
    pot, cert, c = _setup("Vminus")
    rep = decomposition_run(0.0, State.zeros(Grid(32)), 1.0, pot, cert, c, dt=0.05)
    assert rep.max_reconstruction == 0 and np.all(rep.P_energy == 0) and rep.N_sup == 0


def test_decomposition_vminus():
    pot, cert, c = _setup("Vminus")
    z = thermal_state(Grid(32), 4, 0.9 * float(c.R_A), -3.0, 1.0, 6, mean_fraction=0.5)
    rep = decomposition_run(-3.0, z, 0.0, pot, cert, c, dt=0.02)
    assert rep.max_reconstruction < 1e-8
    assert rep.P_max_violation <= 0
    star, star_cert = star_potential(6)
    sc = derive_constants(star, star_cert, 1)
    assert rep.K2 == float(sc.K0) and rep.mu1 == float(sc.mu) and sc.K1 == 0


def test_decomposition_rejects_data_outside_absorber():
    pot, cert, c = _setup("Vminus")
    z = thermal_state(Grid(32), 4, 2.0 * float(c.R_A), 0.0, 1.0, 6)
    with pytest.raises(AbsorberViolation):
        decomposition_run(0.0, z, 1.0, pot, cert, c)


def test_decomposition_p_part_reproducible_alone():
    pot, cert, c = _setup("Vminus")
    z = thermal_state(Grid(32), 6, 0.8, -2.0, 1.0, 6)
    rep = decomposition_run(-2.0, z, 0.0, pot, cert, c, dt=0.02)
    star, _ = star_potential(6)
    alone, _ = evolve(z, 0.0, StepperConfig(dt=0.02), star, 1.0)
    assert np.array_equal(alone.u, rep.p_end.u) and np.array_equal(alone.v, rep.p_end.v)


# --- box counting ---------------------------------------------------------------

EPS = np.logspace(-4, 0.5, 30)


def test_box_identical_points():
    pts = np.tile([[0.3, -1.0, 2.0]], (120, 1))
    assert box_dimension_estimate(pts, EPS).dimension == 0


def test_box_segment_cloud(rng):
    t = rng.uniform(0, 1, 400)
    direction = rng.standard_normal(6)
    pts = np.outer(t, direction / np.linalg.norm(direction))
    est = box_dimension_estimate(pts, EPS)
    assert est.dimension == pytest.approx(1.0, abs=0.15)


def test_box_square_cloud(rng):
    pts = rng.uniform(0, 1, (1500, 2))
    est = box_dimension_estimate(pts, np.logspace(-2, 0, 25))
    assert 1.6 < est.dimension < 2.3


def test_box_needs_points_and_range():
    with pytest.raises(DegenerateCloud):
        box_dimension_estimate(np.zeros((10, 2)), EPS)
    pts = np.zeros((120, 2))
    pts[0, 0] = 5e-4  # diameter within a decade of eps_min
    with pytest.raises(DegenerateCloud):
        box_dimension_estimate(pts, EPS)


def test_box_state_metric(rng):
    g = Grid(32)
    states = [State(a * np.sin(2 * np.pi * g.x), 0 * g.x, 0.0) for a in rng.uniform(0, 1, 300)]
    est = box_dimension_estimate(states, EPS, q=2, H=1.0, M=4)
    assert est.dimension == pytest.approx(1.0, abs=0.15)


@given(st.randoms(use_true_random=False))
@settings(max_examples=10)
def test_box_permutation_invariant(r):
    base = np.random.default_rng(1)
    pts = np.vstack([base.uniform(0, 1, (60, 2)), base.uniform(0, 1, (60, 1)) @ [[1.0, 0.5]]])
    perm = list(range(len(pts)))
    r.shuffle(perm)
    a = box_dimension_estimate(pts, EPS)
    b = box_dimension_estimate(pts[perm], EPS)
    assert a.dimension == b.dimension and np.array_equal(a.counts, b.counts)


def test_run_family_threads_match_serial():
    pot, _, _ = _setup("Vminus")
    run = PullbackRun(pot, 1.0, 0.0, (-1.0, -2.0), 1.0, N=32, seeds=(0, 1), cfg=CFG)
    a = run_family(run, 1)
    b = run_family(run, 2)
    for x, y in zip(a, b):
        assert (x.s, x.seed) == (y.s, y.seed)
        assert np.array_equal(x.end.u, y.end.u)
