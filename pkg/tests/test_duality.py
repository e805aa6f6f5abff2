import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughflow import (
    AdjointProblem,
    Field,
    RoughFieldSpec,
    StepperConfig,
    TransportProblem,
    duality_pairing,
    estimate_sobolev_constant,
    euler_zero_experiment,
    make_grid,
    make_kernel,
    max_principle_check,
    serrin_exponents,
    solve_adjoint,
    solve_ns_vorticity,
    solve_transport,
    synth_rough_field,
    vorticity_l1_check,
    weak_residual,
)
from roughflow.duality import (
    BoundReport,
    conjugate,
    cumulative_trapezoid,
    growth_rate,
    limit_case_threshold,
    make_test_bank,
)

from roughflow.spectral import lebesgue_norm

from conftest import rough, sample


def _unit(f, q):
    return f * (1.0 / lebesgue_norm(f, q))


# -- exponents -----------------------------------------------------------------


def test_conjugates():
    assert conjugate(2) == 2
    assert conjugate(4) == pytest.approx(4 / 3)
    assert conjugate(1) == math.inf
    assert conjugate(math.inf) == 1
    with pytest.raises(ValueError):
        conjugate(0.5)


@pytest.mark.parametrize("d, q, p", [(3, 6, 4), (3, 9, 3), (2, math.inf, 2), (2, 4, 4)])
def test_serrin_examples(d, q, p):
    pair = serrin_exponents(d, q)
    assert pair.p == pytest.approx(p)
    assert pair.serrin_ok
    assert 2 / pair.p + d / pair.q == pytest.approx(1)


def test_serrin_rejects_small_q():
    with pytest.raises(ValueError, match="Serrin condition requires q > d"):
        serrin_exponents(3, 2)


def test_serrin_limit_case():
    pair = serrin_exponents(3, 3)
    assert pair.limit_case and pair.p == math.inf
    assert limit_case_threshold(0.1, 0.5) == pytest.approx(0.4)


@settings(max_examples=50, deadline=None)
@given(d=st.integers(2, 3), q=st.floats(3.01, 1e6))
def test_serrin_round_trip(d, q):
    pair = serrin_exponents(d, q)
    assert 2 / pair.p + d / pair.q == pytest.approx(1, abs=1e-12)
    assert 1 / pair.p + 1 / pair.p_conj == pytest.approx(1, abs=1e-12)
    assert pair.sobolev_order == pytest.approx(1 - 2 / pair.p)


def test_growth_rate_decreases_with_nu():
    rates = [growth_rate(0.6, 4, nu) for nu in (0.01, 0.1, 1.0)]
    assert rates[0] > rates[1] > rates[2]
    assert growth_rate(0.6, 2, 0.3) == pytest.approx(0.18)
    with pytest.raises(ValueError):
        growth_rate(0.6, 4, 0)


def test_cumulative_trapezoid():
    t = np.linspace(0, 1, 101)
    assert cumulative_trapezoid(t, 2 * t)[-1] == pytest.approx(1.0, abs=1e-14)


def test_bound_report_length_mismatch():
    with pytest.raises(ValueError, match="differ in length"):
        BoundReport([0, 1], [1], [1, 1], None, "")


# -- maximum principles --------------------------------------------------------


def _adjoint(g, v, phi0, T, nu, dt, w=None):
    return solve_adjoint(AdjointProblem(v, phi0, T, nu=nu, w=w), g, StepperConfig(dt=dt))


def test_flat_bound(g2):
    v = rough(g2, alpha=3, seed=1)
    phi = _adjoint(g2, v, rough(g2, alpha=2, seed=2, scalar=True), 0.5, 0.1, 5e-3)
    rep = max_principle_check(phi)
    assert rep.passes(1e-8)
    assert rep.provenance == "flat bound"


def test_growing_bound_3d():
    g = make_grid(3, 32)
    pair = serrin_exponents(3, 6)
    est = estimate_sobolev_constant(3, pair.sobolev_order, g)
    v = synth_rough_field(RoughFieldSpec(alpha=3, seed=3, k_max=6), g)
    w = _unit(synth_rough_field(RoughFieldSpec(alpha=2.5, seed=4, k_max=6), g), 6)
    phi0 = synth_rough_field(RoughFieldSpec(alpha=2, seed=5, k_max=6, div_free=False), g)
    nu = 0.1
    phi = _adjoint(g, v, phi0, 0.1, nu, 5e-3, w=w)
    rep = max_principle_check(phi, w, nu, pair, est.value, est.provenance)
    assert rep.passes(1e-8)
    assert rep.bound[-1] > rep.bound[0]
    assert np.isfinite(rep.bound[-1])
    assert "N = 32" in rep.provenance


def test_growing_bound_budget_monotone_in_w(g2):
    pair = serrin_exponents(2, 4)
    v = rough(g2, alpha=3, seed=6)
    phi0 = rough(g2, alpha=2, seed=7)
    finals = []
    for scale in (0.05, 0.1, 0.2):
        w = rough(g2, alpha=3, seed=8) * scale
        phi = _adjoint(g2, v, phi0, 0.1, 1.0, 5e-3, w=w)
        finals.append(max_principle_check(phi, w, 1.0, pair, 0.73, "test").bound[-1])
    assert np.isfinite(finals[-1])
    assert finals[0] < finals[1] < finals[2]


def test_check_errors(g2):
    phi = _adjoint(g2, None, rough(g2, scalar=True), 0.1, 0.1, 1e-2)
    w = rough(g2, seed=1)
    with pytest.raises(ValueError, match="Sobolev constant"):
        max_principle_check(phi, w, 0.1)
    with pytest.raises(ValueError, match="violate"):
        max_principle_check(phi, w, 0.1, serrin_exponents(2, 4).__class__(3.0, 4.0, 2), 0.7)
    with pytest.raises(ValueError, match="positive"):
        max_principle_check(phi, w, 0.1, serrin_exponents(2, 4), -1.0)


def test_vorticity_l1_2d(g2):
    omega0 = rough(g2, alpha=2, seed=9, scalar=True, k_max=4)
    run = solve_ns_vorticity(omega0, 0.05, g2, StepperConfig(dt=1e-2), 0.5)
    rep = vorticity_l1_check(run)
    assert rep.passes(1e-8)


def test_vorticity_l1_zero_data(g2):
    run = solve_ns_vorticity(Field.zeros(g2), 0.05, g2, StepperConfig(dt=1e-2), 0.1)
    rep = vorticity_l1_check(run)
    assert rep.max_ratio == 0.0 and rep.passes()


def test_vorticity_l1_needs_viscosity(g2):
    run = solve_ns_vorticity(Field.zeros(g2), 0.0, g2, StepperConfig(dt=1e-2), 0.1)
    with pytest.raises(ValueError, match="nu > 0"):
        vorticity_l1_check(run)


def test_vorticity_l1_3d_needs_constant():
    g = make_grid(3, 16)
    u0 = synth_rough_field(RoughFieldSpec(alpha=3, seed=1, k_max=4), g)
    u0 = _unit(u0, 6)
    run = solve_ns_vorticity(u0, 0.1, g, StepperConfig(dt=1e-2), 0.05, velocity=True, u_exponents=(6,))
    with pytest.raises(ValueError, match="Sobolev constant"):
        vorticity_l1_check(run)
    rep = vorticity_l1_check(run, serrin_exponents(3, 6), 0.61, "test")
    assert np.isfinite(rep.bound[-1]) and rep.passes(1e-8)


# -- weak residual -------------------------------------------------------------


def _transport(g, v, a0, T, nu, dt, scheme="imex-rk2"):
    return solve_transport(TransportProblem(v, a0, T, nu=nu), g, StepperConfig(dt=dt, scheme=scheme))


def test_weak_residual_small_for_solution(g2):
    v = rough(g2, alpha=4, seed=10, k_max=5)
    a = _transport(g2, v, rough(g2, alpha=4, seed=11, k_max=5, scalar=True), 0.5, 0.1, 1e-3)
    assert weak_residual(a, v, nu=0.1, relative=True) <= 1e-6


def test_weak_residual_zero_solution(g2):
    a = _transport(g2, rough(g2, seed=1), Field.zeros(g2), 0.1, 0.1, 1e-2)
    assert weak_residual(a, rough(g2, seed=1), nu=0.1) == 0.0


def test_weak_residual_detects_noise(g2):
    v = rough(g2, alpha=4, seed=10, k_max=5)
    a = _transport(g2, v, rough(g2, alpha=4, seed=11, k_max=5, scalar=True), 0.5, 0.1, 1e-3)
    clean = weak_residual(a, v, nu=0.1, relative=True)
    rng = np.random.default_rng(0)
    amp = 0.01 * max(np.abs(f.values).max() for f in a.fields)
    a.fields = [Field(g2, f.values + amp * rng.standard_normal(f.values.shape)) for f in a.fields]
    assert weak_residual(a, v, nu=0.1, relative=True) >= 10 * clean


def test_weak_residual_empty_bank(g2):
    a = _transport(g2, None, rough(g2, scalar=True), 0.1, 0.1, 1e-2)
    with pytest.raises(ValueError, match="empty test bank"):
        weak_residual(a, None, nu=0.1, test_bank=[])


def test_test_bank_shape(g2):
    bank = make_test_bank(g2, 1, 2.0)
    assert len(bank) == 48
    for tf in bank:
        assert tf.theta(np.array([0.0, 2.0])).max() == 0.0


# -- duality pairing -----------------------------------------------------------


def _pair(g, v, a0, phi0, T, nu, dt, scheme="imex-rk2"):
    cfg = StepperConfig(dt=dt, scheme=scheme)
    a = solve_transport(TransportProblem(v, a0, T, nu=nu), g, cfg)
    phi = solve_adjoint(AdjointProblem(v, phi0, T, nu=nu), g, cfg)
    return a, phi


@pytest.fixture(scope="module")
def smooth_pair():
    g = make_grid(2, 32)
    v = rough(g, alpha=4, seed=12, k_max=8)
    a0 = rough(g, alpha=4, seed=13, k_max=8, scalar=True)
    phi0 = rough(g, alpha=4, seed=14, k_max=8, scalar=True)
    return g, v, _pair(g, v, a0, phi0, 0.5, 0.1, 2e-3)


def test_pairing_zero_initial(g2):
    v = rough(g2, seed=1)
    a, phi = _pair(g2, v, Field.zeros(g2), rough(g2, scalar=True, seed=2), 0.1, 0.1, 1e-2)
    rep = duality_pairing(a, phi)
    assert rep.drift == 0.0 and rep.verdict


def test_pairing_smooth_drift(smooth_pair):
    g, v, (a, phi) = smooth_pair
    rep = duality_pairing(a, phi)
    scale = np.sqrt(a.monitors["energy"][0] * 2) * np.sqrt(phi.monitors["energy"][0] * 2)
    assert rep.drift <= 1e-6 * scale
    assert rep.verdict


def test_pairing_drift_order():
    g = make_grid(2, 32)
    v = rough(g, alpha=4, seed=12, k_max=8)
    a0 = rough(g, alpha=4, seed=13, k_max=8, scalar=True)
    phi0 = rough(g, alpha=4, seed=14, k_max=8, scalar=True)
    drifts = [duality_pairing(*_pair(g, v, a0, phi0, 0.5, 0.1, dt, "imex-euler")).drift for dt in (1e-2, 5e-3)]
    assert np.log2(drifts[0] / drifts[1]) == pytest.approx(1.0, abs=0.15)


def test_mollified_pairing_within_budget(smooth_pair):
    g, v, (a, phi) = smooth_pair
    ratios = []
    for e in (8 * g.h, 4 * np.sqrt(2) * g.h, 4 * g.h):
        rep = duality_pairing(a, phi, make_kernel("compact-bump", e, g), v=v)
        assert rep.mollified and rep.verdict
        ratios.append(rep.drift / rep.meta["commutator_time_l1"])
    assert max(ratios) / min(ratios) <= 3


def test_pairing_mismatch_errors(smooth_pair):
    g, v, (a, phi) = smooth_pair
    other = make_grid(2, 16)
    b, psi = _pair(other, None, rough(other, scalar=True), rough(other, scalar=True, seed=1), 0.5, 0.1, 1e-2)
    with pytest.raises(ValueError, match="different grids"):
        duality_pairing(a, psi)
    short = solve_adjoint(AdjointProblem(v, phi.fields[0], 0.25, nu=0.1), g, StepperConfig(dt=2e-3))
    with pytest.raises(ValueError, match="horizon mismatch"):
        duality_pairing(a, short)
    with pytest.raises(ValueError, match="transporting field"):
        duality_pairing(a, phi, make_kernel("compact-bump", 8 * g.h, g))


# -- Euler zero data -----------------------------------------------------------


@pytest.mark.parametrize("p", [2.0, math.inf])
def test_euler_zero_exact(p):
    rep, run = euler_zero_experiment(make_grid(2, 32), 0.1, 0.0, p, dt=1e-2)
    assert rep.measured.max() == 0.0
    assert rep.meta["max_abs_u"] == 0.0


def test_euler_tiny_data():
    rep, run = euler_zero_experiment(make_grid(2, 32), 0.2, 1e-13, 2.0, dt=1e-2)
    r = rep.measured / rep.measured[0]
    assert np.abs(r - 1).max() <= 1e-6
    rep, run = euler_zero_experiment(make_grid(2, 32), 0.2, 1e-13, math.inf, dt=1e-2)
    assert rep.measured.max() <= rep.measured[0] * (1 + 1e-6)


def test_euler_needs_2d():
    with pytest.raises(ValueError, match="two dimensional"):
        euler_zero_experiment(make_grid(3, 16), 0.1, 0.0)
