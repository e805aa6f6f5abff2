import json

import numpy as np
import pytest

from roughflow import (
    CommutatorReport,
    Field,
    RoughFieldSpec,
    commutator_C,
    commutator_C_taylor,
    commutator_D,
    convergence_study,
    make_grid,
    make_kernel,
    synth_rough_field,
)
from roughflow.commutators import fit_loglog, l1
from roughflow.mollify import PROFILES
from roughflow.snapshots import read_csv
from roughflow.spectral import gradient, lebesgue_norm

from conftest import rough


@pytest.fixture(scope="module")
def g():
    return make_grid(2, 64)


@pytest.fixture(scope="module")
def va(g):
    v = synth_rough_field(RoughFieldSpec(alpha=4, seed=1, k_max=8), g)
    a = rough(g, alpha=4, seed=2, k_max=8, scalar=True)
    return v, a


def _scale(v, a):
    gn = np.sqrt(sum(lebesgue_norm(gradient(v.component(i)), 2) ** 2 for i in range(v.m)))
    return 1 + lebesgue_norm(a, 2) * gn


def test_constant_v_gives_zero(g):
    v = Field(g, np.stack([np.full(g.shape, 1.3), np.full(g.shape, -0.4)]))
    a = rough(g, alpha=2, seed=3, scalar=True)
    k = make_kernel("compact-bump", 8 * g.h, g)
    assert l1(commutator_C(v, a, k)) <= 1e-12
    assert l1(commutator_C_taylor(v, a, k)) <= 1e-12


def test_zero_a_gives_exact_zero(g, va):
    k = make_kernel("compact-bump", 8 * g.h, g)
    assert np.all(commutator_C(va[0], Field.zeros(g), k).values == 0)


@pytest.mark.parametrize("profile", PROFILES)
@pytest.mark.parametrize("factor", [4, 8, 16])
def test_taylor_form_agrees(g, va, profile, factor):
    v, a = va
    k = make_kernel(profile, factor * g.h, g)
    diff = l1(commutator_C(v, a, k) - commutator_C_taylor(v, a, k))
    assert diff <= 1e-6 * _scale(v, a)


def test_halving_eps_halves_commutator(g, va):
    v, a = va
    c8 = l1(commutator_C(v, a, make_kernel("compact-bump", 8 * g.h, g)))
    c4 = l1(commutator_C(v, a, make_kernel("compact-bump", 4 * g.h, g)))
    assert c4 <= 0.5 * c8


def test_C_bilinear(g, va):
    v, a = va
    b = rough(g, alpha=3, seed=5, k_max=8, scalar=True)
    k = make_kernel("truncated-gaussian", 6 * g.h, g)
    lhs = commutator_C(v * 2.0, a * 0.5 + b, k).values
    rhs = (commutator_C(v, a, k) + commutator_C(v, b, k) * 2.0).values
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1, np.abs(rhs).max())


def test_C_scales_with_mass(g, va):
    v, a = va
    full = commutator_C(v, a, make_kernel("compact-bump", 8 * g.h, g))
    light = commutator_C(v, a, make_kernel("compact-bump", 8 * g.h, g, mass=0.9))
    assert np.abs(light.values - 0.9 * full.values).max() <= 1e-12 * np.abs(full.values).max()


@pytest.mark.parametrize("profile", PROFILES)
def test_D_constant_w(g, profile):
    w = Field(g, np.stack([np.full(g.shape, 0.7), np.full(g.shape, 2.0)]))
    b = rough(g, alpha=2, seed=6, div_free=False)
    k = make_kernel(profile, 8 * g.h, g)
    assert l1(commutator_D(w, b, k)) <= 1e-12 * max(1, l1(b))


def test_D_zero_and_decay(g):
    w = rough(g, alpha=4, seed=7, k_max=8)
    b = rough(g, alpha=4, seed=8, k_max=8, div_free=False)
    k = make_kernel("compact-bump", 8 * g.h, g)
    assert l1(commutator_D(w, Field.zeros(g, 2), k)) == 0.0
    vals = [l1(commutator_D(w, b, make_kernel("compact-bump", e * g.h, g))) for e in (16, 8, 4)]
    assert vals[0] > vals[1] > vals[2]


def test_shape_errors(g, va):
    v, a = va
    k = make_kernel("compact-bump", 8 * g.h, g)
    with pytest.raises(ValueError, match="scalar"):
        commutator_C(v, v, k)
    with pytest.raises(ValueError, match="components"):
        commutator_D(v, a, k)
    with pytest.raises(ValueError, match="different grids"):
        commutator_C(rough(make_grid(2, 32)), a, k)
    with pytest.raises(ValueError, match="8 Gauss"):
        commutator_C_taylor(v, a, k, quadrature_nodes_r=4)


def test_smooth_study_slope(g):
    eps = [16 * g.h, 8 * g.h, 4 * np.sqrt(2) * g.h, 4 * g.h]
    rep = convergence_study(
        RoughFieldSpec(alpha=4, seed=1, k_max=8), RoughFieldSpec(alpha=4, seed=2, k_max=8), "compact-bump", eps, g,
        crossform=False,
    )
    assert rep.slope >= 0.9
    assert rep.monotone
    assert np.all(np.isnan(rep.l1_D))


def test_rough_study_still_decays(g):
    eps = [16 * g.h, 8 * g.h, 4 * np.sqrt(2) * g.h, 4 * g.h]
    rep = convergence_study(
        RoughFieldSpec(alpha=2.2, seed=1, k_max=21), RoughFieldSpec(alpha=2.2, seed=2, k_max=21), "compact-bump", eps, g,
        crossform=False,
    )
    assert rep.slope > 0
    assert rep.monotone


def test_study_report_files(tmp_path, g, va):
    v, a = va
    w = rough(g, alpha=4, seed=9, k_max=8)
    b = rough(g, alpha=4, seed=10, k_max=8, div_free=False)
    eps = [16 * g.h, 8 * g.h, 4 * g.h]
    rep = convergence_study(v, a, "truncated-gaussian", eps, d_fields=(w, b), quadrature_nodes_r=12)
    paths = rep.write(tmp_path, config_hash="abc")
    table = read_csv(paths[0])
    assert list(table) == ["eps", "L1_C", "L1_D", "crossform_L1"]
    assert np.array_equal(table["eps"], rep.eps)
    assert np.all(table["L1_D"] > 0)
    meta = json.loads(paths[1].read_text())
    assert meta["config_hash"] == "abc"
    assert meta["slope"] == pytest.approx(rep.slope)


def test_study_errors(g, va):
    v, a = va
    with pytest.raises(ValueError, match="at least 3"):
        convergence_study(v, a, "compact-bump", [8 * g.h, 8 * g.h, 4 * g.h])
    const = Field(g, np.stack([np.ones(g.shape), np.ones(g.shape)]))
    with pytest.raises(ValueError, match="usable"):
        convergence_study(const, a, "compact-bump", [16 * g.h, 8 * g.h, 4 * g.h], crossform=False)
    with pytest.raises(ValueError, match="decreasing"):
        CommutatorReport(np.array([1.0, 2.0]), np.ones(2), np.ones(2), np.ones(2), 1.0, 0.0, "x", 1.0, {})


def test_fit_loglog_exact():
    x = np.array([1.0, 0.5, 0.25, 0.125])
    slope, res = fit_loglog(x, 3 * x**1.5)
    assert slope == pytest.approx(1.5, abs=1e-12)
    assert res <= 1e-12
