import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscillon.diagnostics import (
    ROW_FIELDS,
    EnergyDensityFrame,
    Recorder,
    energy_density,
    hamiltonian_total,
    identity_residual,
    localization_metric,
    row,
)
from oscillon.dynamics import StepperConfig, evolve
from oscillon.errors import ZeroEnergy
from oscillon.potential import builtin, derive_constants
from oscillon.pullback import thermal_state
from oscillon.spectral import Grid, State, l2_norm

G = Grid(64)
SIN = np.sin(2 * np.pi * G.x)
ZERO = np.zeros(64)
VZERO, _ = builtin("Vzero")
PI = math.pi


def _consts(name, alpha=None, H=1):
    pot, cert = builtin(name, alpha)
    return pot, derive_constants(pot, cert, H)


def test_row_at_origin():
    pot, c = _consts("Vplus")
    r = row(State(ZERO, ZERO, 0.0), c, pot)
    assert all(v == 0 for v in r.values())
    assert ROW_FIELDS[0] == "t" and len(r.values()) == 9


def test_row_linear_sine():
    r = row(State(SIN, ZERO, 0.0), None, VZERO, H=1.0)
    assert r.E_mech == pytest.approx(2 * PI**2, rel=1e-14)
    assert r.Phi == pytest.approx(2 * PI**2, rel=1e-14)


def test_row_vplus_constant():
    pot, c = _consts("Vplus")
    r = row(State(np.ones(64), ZERO, 0.0), c, pot)
    assert r.V_total == pytest.approx(float(Fraction(11, 12)), rel=1e-15)


def test_row_needs_H_without_constants():
    with pytest.raises(ValueError):
        row(State(SIN, ZERO, 0.0), None, VZERO)


def test_hamiltonian_examples():
    assert hamiltonian_total(State(ZERO, ZERO, 0.0), VZERO, 1.0) == 0
    assert hamiltonian_total(State(SIN, ZERO, 0.0), VZERO, 1.0) == pytest.approx(PI**2, rel=1e-14)


def test_hamiltonian_canonical_momentum(rng):
    # dH/dpi = e^(-Ht) pi with pi = e^(Ht) v gives back v: the kinetic part is
    # (1/2) e^(Ht) |v|^2, and the literal reading swaps |v| for |u|
    H, t = 0.3, 1.7
    u, v = rng.standard_normal(64), rng.standard_normal(64)
    z = State(u, v, t)
    pot = VZERO
    kin = hamiltonian_total(z, pot, H) - hamiltonian_total(State(u, ZERO, t), pot, H)
    assert kin == pytest.approx(0.5 * math.exp(H * t) * l2_norm(v) ** 2, rel=1e-12)
    # the printed momentum e^(Ht) u only changes the kinetic part
    diff = hamiltonian_total(z, pot, H, literal=True) - hamiltonian_total(z, pot, H)
    assert diff == pytest.approx(0.5 * math.exp(H * t) * (l2_norm(u) ** 2 - l2_norm(v) ** 2), rel=1e-12)


def test_density_examples():
    f = energy_density(State(ZERO, ZERO, 0.0), VZERO, 1.0)
    assert np.all(f.density == 0)
    f = energy_density(State(SIN, ZERO, 0.0), VZERO, 1.0)
    assert np.allclose(f.density, 0.5 * (2 * PI) ** 2 * np.cos(2 * PI * G.x) ** 2, atol=1e-10)


@pytest.mark.parametrize("name", ["Vplus", "Vminus"])
def test_density_integral_consistency(name):
    pot, c = _consts(name)
    z = thermal_state(G, 3, 2.0, 0.4, 1.0, 6)
    f = energy_density(z, pot, 1.0)
    r = row(z, c, pot)
    assert f.integral() == pytest.approx(0.5 * r.E_mech + r.V_total, rel=1e-10)


def test_localization_examples():
    x = G.x
    assert localization_metric(EnergyDensityFrame(0.0, x, np.full(64, 2.0))) == pytest.approx(1.0)
    spike = np.zeros(64)
    spike[5] = 3.0
    assert localization_metric(EnergyDensityFrame(0.0, x, spike)) == pytest.approx(64.0)
    cos2 = np.cos(2 * PI * x) ** 2
    assert localization_metric(EnergyDensityFrame(0.0, x, cos2)) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(ZeroEnergy):
        localization_metric(EnergyDensityFrame(0.0, x, np.zeros(64)))


def _residuals(pot, consts, H, dt, method="strang_exact", T=1.0, N=64, seed=2):
    z = thermal_state(Grid(N), seed, 1.0, 0.0, H, pot.q, k0=2.0)
    rec = Recorder(pot, consts, H).start(z)
    evolve(z, T, StepperConfig(method, dt), pot, H, rec)
    return np.array([r.identity_residual for r in rec.rows])


def test_identity_residual_stationary_origin():
    pot, c = _consts("Vplus")
    r0 = row(State(ZERO, ZERO, 0.0), c, pot)
    r1 = row(State(ZERO, ZERO, 0.1), c, pot)
    assert identity_residual(r0, r1, 1.0) == 0


def test_identity_residual_linear_second_order():
    a = _residuals(VZERO, None, 1.0, 0.02).max()
    b = _residuals(VZERO, None, 1.0, 0.01).max()
    assert 3.5 < a / b < 4.5


def test_identity_residual_rk4_ratio():
    pot, c = _consts("Vminus")
    a = _residuals(pot, c, 1.0, 0.004, "rk4", N=16).max()
    b = _residuals(pot, c, 1.0, 0.002, "rk4", N=16).max()
    assert 3.5 < a / b < 4.5


def test_recorder_counts_and_strides():
    pot, c = _consts("Vminus")
    z = thermal_state(G, 1, 1.0, 0.0, 1.0, 6)
    rec = Recorder(pot, c, 1.0, snapshot_stride=7).start(z)
    _, traj = evolve(z, 1.0, StepperConfig(dt=0.01), pot, 1.0, rec)
    assert len(rec.rows) == traj.n_steps == 100
    assert len(rec.frames) == 100 // 7


@pytest.mark.parametrize("name,alpha", [("Vplus", None), ("Vminus", None), ("Valpha_minus", 0.4)])
@given(seed=st.integers(0, 10_000), energy=st.floats(0.01, 20))
@settings(max_examples=6)
def test_lambda_sandwich_and_phi_floor(name, alpha, seed, energy):
    pot, c = _consts(name, alpha)
    c1, c2, b1 = float(c.c1), float(c.c2), float(c.b1)
    z = thermal_state(Grid(32), seed, energy, 0.0, 1.0, 6)
    rec = Recorder(pot, c, 1.0).start(z)
    evolve(z, 3.0, StepperConfig(dt=0.02), pot, 1.0, rec)
    for r in [rec.initial] + rec.rows:
        tol = 1e-12 * (1 + abs(r.E_Xt))
        assert c1 * r.E_Xt - 2 * b1 <= r.Lambda1 + tol
        assert r.Lambda1 <= c2 * r.E_Xt + tol
        assert r.Phi >= -2 * b1 - tol


@pytest.mark.parametrize("name,alpha", [("Vplus", None), ("Vminus", None), ("Valpha_minus", 0.4)])
def test_lambda_decay_bound(name, alpha):
    pot, c = _consts(name, alpha)
    mu, c0, b1 = float(c.mu), float(c.c0), float(c.b1)
    z = thermal_state(Grid(32), 11, 5.0, 0.0, 1.0, 6)
    rec = Recorder(pot, c, 1.0).start(z)
    evolve(z, 10.0, StepperConfig(dt=0.01), pot, 1.0, rec)
    L0 = rec.initial.Lambda1
    for r in rec.rows:
        assert r.Lambda1 <= L0 * math.exp(-mu * r.t) + 2 * (2 * c0 + b1) + 1e-9
