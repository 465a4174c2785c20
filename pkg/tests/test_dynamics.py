import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscillon.dynamics import (
    LinearPropagator,
    StepperConfig,
    apply_process,
    evolve,
    linear_propagate_exact,
    rhs,
    step,
    time_grid,
)
from oscillon.errors import ArgumentOverflow, CflViolation, TimeOrder
from oscillon.oracle import mode_ode_solve
from oscillon.potential import builtin
from oscillon.pullback import thermal_state
from oscillon.spectral import Grid, State, energy_X, h1_seminorm, l2_norm

VZERO, _ = builtin("Vzero")
VPLUS, _ = builtin("Vplus")
VMINUS, _ = builtin("Vminus")
G = Grid(32)
SIN = np.sin(2 * np.pi * G.x)


def conserved(z, H):
    return h1_seminorm(z.u) ** 2 + math.exp(2 * H * z.t) * l2_norm(z.v) ** 2


def test_rhs_origin():
    z = State.zeros(G, 3.0)
    du, dv = rhs(z, VPLUS, 1.0)
    assert np.all(du == 0) and np.all(dv == 0)


def test_rhs_linear_eigenfunction():
    du, dv = rhs(State(SIN, 0 * SIN, 0.0), VZERO, 1.0)
    assert np.all(du == 0)
    assert np.allclose(dv, -(2 * np.pi) ** 2 * SIN, atol=1e-10)


def test_rhs_constant_field_plus():
    one = np.ones(32)
    _, dv = rhs(State(one, 0 * one, 0.0), VPLUS, 1.0)
    assert np.allclose(dv, -3.0, atol=1e-13)
    _, dv = rhs(State(one, 0 * one, 0.0), VPLUS, 1.0, dealias=True)
    assert np.allclose(dv, -3.0, atol=1e-13)


def test_zero_mode_equilibrium():
    one = np.ones(32)
    for t1 in (0.5, 7.0, 40.0):
        z = linear_propagate_exact(State(one, 0 * one, 0.0), t1, 1.0)
        assert np.allclose(z.u, 1.0, atol=1e-15) and np.allclose(z.v, 0.0, atol=1e-15)


def test_zero_mode_closed_form():
    one = np.ones(32)
    z = linear_propagate_exact(State(0 * one, one, 0.0), 1.0, 1.0)
    assert np.allclose(z.u, 1 - math.exp(-1), rtol=0, atol=1e-15)
    assert np.allclose(z.v, math.exp(-1), rtol=0, atol=1e-15)


def _mode_coeffs(z, k):
    N = len(z.u)
    return 2 * np.fft.rfft(z.u)[k].real / N, 2 * np.fft.rfft(z.v)[k].real / N


def test_exact_mode_one_matches_ode_oracle():
    z = linear_propagate_exact(State(np.cos(2 * np.pi * G.x), 0 * SIN, 0.0), 1.0, 1.0)
    u1, v1 = _mode_coeffs(z, 1)
    ur, vr = mode_ode_solve(1, (1.0, 0.0), 0.0, 1.0, 1.0, tol=1e-13)
    assert abs(u1 - ur) < 1e-10 and abs(v1 - vr) < 1e-10


def test_strang_reduces_to_exact_for_linear():
    z = State(SIN, np.cos(6 * np.pi * G.x), 0.0)
    F0 = conserved(z, 1.0)
    z1, _ = evolve(z, 4.0, StepperConfig(dt=0.05), VZERO, 1.0)
    assert conserved(z1, 1.0) == pytest.approx(F0, rel=1e-12)


def test_step_origin():
    z = State.zeros(G, 0.0)
    for method in ("strang_exact", "rk4"):
        out = step(z, StepperConfig(method=method, dt=1e-3), VPLUS, 1.0)
        assert np.all(out.u == 0) and np.all(out.v == 0)


def test_strang_second_order_against_rk4():
    z = thermal_state(G, 3, 0.5, 0.0, 1.0, 6, k0=2.0)
    ref, _ = evolve(z, 0.5, StepperConfig("rk4", dt=5e-4), VPLUS, 1.0)
    errs = []
    for dt in (0.02, 0.01, 0.005):
        out, _ = evolve(z, 0.5, StepperConfig(dt=dt), VPLUS, 1.0)
        errs.append(math.sqrt(energy_X(out - ref, 6, 1.0)))
    for a, b in zip(errs, errs[1:]):
        assert 3.5 < a / b < 4.5


def test_rk4_cfl():
    z = State(SIN, 0 * SIN, 0.0)
    with pytest.raises(CflViolation):
        step(z, StepperConfig("rk4", dt=0.01), VPLUS, 1.0)


def test_phase_overflow_reported():
    prop = LinearPropagator(32, 1.0)
    s = prop.horizon()
    z = State(SIN, 0 * SIN, s - 1.0)
    with pytest.raises(ArgumentOverflow):
        linear_propagate_exact(z, s, 1.0)
    linear_propagate_exact(State(SIN, 0 * SIN, s + 1e-6), s + 1.0, 1.0)


def test_exact_propagation_deep_in_the_past():
    # wave speed e^(-Ht) ~ 1e13: the exact flow keeps the conserved quantity
    H = 1.0
    prop = LinearPropagator(32, H)
    s = prop.horizon() + 0.5
    z = State(SIN, np.cos(4 * np.pi * G.x), s)
    F0 = conserved(z, H)
    z1, _ = evolve(z, s + 5.0, StepperConfig(dt=0.1), VZERO, H)
    assert conserved(z1, H) == pytest.approx(F0, rel=1e-10)


def test_evolve_identity():
    z = State(SIN, SIN, 2.0)
    out, rec = evolve(z, 2.0, StepperConfig(), VPLUS, 1.0)
    assert rec.n_steps == 0
    assert np.array_equal(out.u, z.u) and np.array_equal(out.v, z.v)
    out = apply_process(2.0, 2.0, z, StepperConfig(), VPLUS, 1.0)
    assert np.array_equal(out.u, z.u)


def test_evolve_lands_exactly():
    z = State(SIN, 0 * SIN, 0.0)
    seen = []
    out, rec = evolve(z, 1.003, StepperConfig(dt=0.01), VPLUS, 1.0, observer=lambda s: seen.append(s.t))
    assert out.t == 1.003 and seen[-1] == 1.003 and len(seen) == rec.n_steps == 101


def test_composition_adaptive():
    cfg = StepperConfig(dt=0.1, adapt=True, local_error_target=1e-8)
    z = thermal_state(G, 1, 2.0, 0.0, 1.0, 6)
    direct, _ = evolve(z, 2.0, cfg, VMINUS, 1.0)
    mid, _ = evolve(z, 1.0, cfg, VMINUS, 1.0)
    two, _ = evolve(mid, 2.0, cfg, VMINUS, 1.0)
    rel = math.sqrt(energy_X(direct - two, 6, 1.0) / energy_X(direct, 6, 1.0))
    assert rel <= 5 * cfg.local_error_target


def test_process_composition():
    cfg = StepperConfig(dt=0.01)
    z = thermal_state(G, 2, 1.0, 0.0, 1.0, 6)
    direct = apply_process(0.0, 2.0, z, cfg, VPLUS, 1.0)
    two = apply_process(1.0, 2.0, apply_process(0.0, 1.0, z, cfg, VPLUS, 1.0), cfg, VPLUS, 1.0)
    assert math.sqrt(energy_X(direct - two, 6, 1.0)) < 1e-12


def test_vplus_decays():
    z = thermal_state(G, 4, 1.0, 0.0, 1.0, 6)
    out, _ = evolve(z, 30.0, StepperConfig(dt=0.02), VPLUS, 1.0)
    assert energy_X(out, 6, 1.0) < 1e-6 * energy_X(z, 6, 1.0)


def test_time_order():
    z = State(SIN, SIN, 1.0)
    with pytest.raises(TimeOrder):
        apply_process(1.0, 0.5, z, StepperConfig(), VPLUS, 1.0)
    with pytest.raises(TimeOrder):
        evolve(z, 0.0, StepperConfig(), VPLUS, 1.0)


def test_time_grid_shared_nodes():
    a = time_grid(-3.0, 1.0, 0.01)
    b = time_grid(-3.0, 2.0, 0.01)
    assert a[-1] == 1.0 and np.array_equal(a[:-1], b[: len(a) - 1])


def test_dealias_agrees_for_resolved_data():
    z = thermal_state(Grid(64), 5, 0.5, 0.0, 1.0, 6, k0=2.0)
    a, _ = evolve(z, 1.0, StepperConfig(dt=0.01), VMINUS, 1.0)
    b, _ = evolve(z, 1.0, StepperConfig(dt=0.01, dealias=True), VMINUS, 1.0)
    assert math.sqrt(energy_X(a - b, 6, 1.0)) < 1e-8


@given(
    H=st.sampled_from([0.1, 0.5, 1.0, 3.0]),
    seed=st.integers(0, 10_000),
    s=st.floats(-5, 5),
    length=st.floats(0.1, 20),
)
@settings(max_examples=25)
def test_linear_conservation_law(H, seed, s, length):
    r = np.random.default_rng(seed)
    z = State(r.standard_normal(32), r.standard_normal(32), s)
    z1 = linear_propagate_exact(z, s + length, H)
    assert conserved(z1, H) == pytest.approx(conserved(z, H), rel=1e-10)


@given(st.sampled_from(["Vplus", "Vminus"]), st.floats(-3, 3))
@settings(max_examples=10)
def test_origin_fixed(name, s):
    pot, _ = builtin(name)
    out = apply_process(s, s + 1.0, State.zeros(G, s), StepperConfig(dt=0.05), pot, 1.0)
    assert np.all(out.u == 0) and np.all(out.v == 0)


def test_continuous_dependence():
    cfg = StepperConfig(dt=0.01)
    z = thermal_state(G, 7, 1.0, 0.0, 1.0, 6)
    dz = thermal_state(G, 8, 1.0, 0.0, 1.0, 6)
    base, _ = evolve(z, 2.0, cfg, VMINUS, 1.0)
    ratios = []
    for d in (1e-2, 1e-4, 1e-6):
        pert = z + dz * d
        out, _ = evolve(pert, 2.0, cfg, VMINUS, 1.0)
        ratios.append(energy_X(out - base, 6, 1.0) / energy_X(dz * d, 6, 1.0))
    assert max(ratios) < 10 * min(ratios)
    assert max(ratios) < 1e3
