import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from c1spacetime import ChartError, ParameterError, RegularityError, VectorField, build
from c1spacetime.curvature import (TestDensity, bianchi_residual, check_genericity, check_null_ec, check_timelike_ec,
                                   christoffel_at, curvature_at, fibonacci_directions, metricity_residual, pair_ricci,
                                   pair_ricci_smooth, ricci_smooth, sectional_form, tidal_force_matrix,
                                   tidal_lower_bound_check)
from c1spacetime.geodesics import build_perp_frame, integrate_geodesic
from c1spacetime.mollify import Mollifier, build_family
from oracles import FROZEN, kinked_pairing, symbolic_curvature

t, x, y = sp.symbols("t x y")


@pytest.fixture(scope="module")
def symbolic():
    H = sp.Rational(3, 4)
    return {
        "DeSitterToy": (build("DeSitterToy", H=0.75, n=3),
                        symbolic_curvature([-1, sp.exp(2 * H * t), sp.exp(2 * H * t)], [t, x, y])),
        "FlrwToy": (build("FlrwToy", p=2.0, n=3), symbolic_curvature([-1, t ** 4, t ** 4], [t, x, y])),
        "NecSlab": (build("NecSlab", beta=-0.5, n=3),
                    symbolic_curvature([-(1 - sp.Rational(1, 2) * x ** 2), 1, 1], [t, x, y])),
    }


@pytest.mark.parametrize("name", ["DeSitterToy", "FlrwToy", "NecSlab"])
def test_against_symbolic_oracle(symbolic, name):
    g, (gam, rm, ric) = symbolic[name]
    pts = g.chart.shrink(0.1).sample(np.random.default_rng(5), 25)
    cur = curvature_at(g, pts)
    for i, p in enumerate(pts):
        assert np.max(np.abs(cur.christoffel[i] - gam(p))) < 1e-12
        assert np.max(np.abs(cur.riemann[i] - rm(p))) < 1e-10 * max(1, np.max(np.abs(rm(p))))
        assert np.max(np.abs(cur.ricci[i] - ric(p))) < 1e-10 * max(1, np.max(np.abs(ric(p))))


@pytest.mark.parametrize("H,n", [(1.0, 4), (0.5, 3), (-1.0, 4)])
def test_de_sitter_constant_curvature(H, n):
    g = build("DeSitterToy", H=H, n=n)
    pts = g.chart.shrink(0.1).sample(np.random.default_rng(6), 10)
    cur = curvature_at(g, pts)
    d = np.eye(n)
    # R(d_j, d_k) d_i = H^2 (g_ki d_j - g_ji d_k)
    want = H * H * (np.einsum("pki,mj->pmijk", cur.metric, d) - np.einsum("pji,mk->pmijk", cur.metric, d))
    assert np.max(np.abs(cur.riemann - want)) < 1e-11
    assert np.max(np.abs(cur.ricci - (n - 1) * H * H * cur.metric)) < 1e-11
    assert np.allclose(cur.scalar, n * (n - 1) * H * H)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.6, 2.9), st.floats(-1.5, 1.5), st.floats(0.2, 3.0))
def test_identities_hold_pointwise(tt, xx, p):
    g = build("FlrwToy", p=p, n=4)
    pt = np.array([tt, xx, 0.3, -0.2])
    cur = curvature_at(g, pt)
    gm, dg = g.jet(pt, 1)
    scale = max(1.0, float(np.max(np.abs(cur.riemann))))
    assert np.max(np.abs(metricity_residual(gm, dg, cur.christoffel))) < 1e-10 * max(1, np.max(np.abs(dg)))
    assert np.max(np.abs(bianchi_residual(cur.riemann))) < 1e-10 * scale
    assert np.max(np.abs(cur.riemann + np.swapaxes(cur.riemann, -1, -2))) < 1e-12 * scale
    low = np.einsum("mp,mijk->pijk", gm, cur.riemann)
    assert np.max(np.abs(low + np.swapaxes(low, 0, 1))) < 1e-10 * scale
    assert np.max(np.abs(cur.ricci - cur.ricci.T)) < 1e-10 * scale
    ricci_smooth(g, pt, cross_check=True)


def test_flrw_ricci_fact():
    # Ric(d_t, d_t) = -(n-1) p (p-1) / t^2
    g = build("FlrwToy", p=2.0, n=4)
    assert ricci_smooth(g, np.array([1.5, 0, 0, 0]))[0, 0] == pytest.approx(-3 * 2 / 1.5 ** 2, rel=1e-12)


def test_sectional_form_sign_on_de_sitter():
    g = build("DeSitterToy", H=1.0, n=4)
    cur = curvature_at(g, np.zeros(4))
    X, V = np.array([1.0, 0, 0, 0]), np.array([0, 1.0, 0, 0])
    # H^2 (g(V,V) g(X,X) - g(X,V)^2) = -1
    assert sectional_form(cur.riemann, cur.metric, X, V) == pytest.approx(-1.0, abs=1e-12)


def test_curvature_needs_second_derivatives():
    with pytest.raises(RegularityError):
        curvature_at(build("KinkedWave"), np.zeros(4))
    assert christoffel_at(build("KinkedWave"), np.zeros(4)).shape == (4, 4, 4)


PAIRS = [([0, 1, 0, 0], [0, 0, 0, 0], 0.5, "kinked_pairing_x_c0_w0.5"),
         ([0, 0, 1, 0], [0, 0.1, 0, 0], 0.4, "kinked_pairing_y_c0.1_w0.4"),
         ([0, 1, 1, 0], [0.2, -0.2, 0.1, 0], 0.6, "kinked_pairing_xy_c-0.2_w0.6")]


@pytest.mark.parametrize("X,center,width,key", PAIRS)
def test_pairing_matches_one_dimensional_oracle(X, center, width, key):
    g = build("KinkedWave")
    assert kinked_pairing(X, center[1], width) == pytest.approx(FROZEN[key], rel=1e-10)
    val = pair_ricci(g, VectorField.constant(X), TestDensity(center, width))
    assert val == pytest.approx(FROZEN[key], rel=1e-9)


def test_pairing_time_direction_vanishes():
    g = build("KinkedWave")
    assert abs(pair_ricci(g, VectorField.constant([1, 0, 0, 0]), TestDensity(np.zeros(4), 0.5))) < 1e-13


def test_pairing_agrees_with_pointwise_on_smooth_metric():
    g = build("FlrwToy", p=2.0, n=3)
    om = TestDensity([1.5, 0.2, -0.1], [0.4, 0.5, 0.5])

    def val(x):
        return np.stack([1 + 0.1 * x[..., 1], 0.3 + 0 * x[..., 0], 0.2 * x[..., 0]], axis=-1)

    def jac(x):
        J = np.zeros(x.shape + (3,))
        J[..., 1, 0] = 0.1
        J[..., 0, 2] = 0.2
        return J

    X = VectorField(val, jac)
    assert pair_ricci(g, X, om) == pytest.approx(pair_ricci_smooth(g, X, om), rel=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 5.0))
def test_pairing_linear_in_density(w):
    g = build("KinkedWave")
    X = VectorField.constant([0, 1, 0.5, 0])
    a = pair_ricci(g, X, TestDensity(np.zeros(4), 0.5))
    b = pair_ricci(g, X, TestDensity(np.zeros(4), 0.5, weight=w))
    assert b == pytest.approx(w * a, rel=1e-12)


def test_pairing_support_and_field_checks():
    g = build("KinkedWave")
    with pytest.raises(ChartError):
        pair_ricci(g, VectorField.constant([0, 1, 0, 0]), TestDensity([0, 1.8, 0, 0], 0.5))
    with pytest.raises(RegularityError):
        pair_ricci(g, VectorField(lambda x: x), TestDensity(np.zeros(4), 0.5))
    with pytest.raises(ParameterError):
        TestDensity(np.zeros(4), 0.0)


def test_tidal_matrices_closed_forms():
    # de Sitter: R(E, u) u = H^2 (g(u,u) E - g(E,u) u) = -H^2 E
    g = build("DeSitterToy", H=1.0, n=4)
    curve = integrate_geodesic(g, np.zeros(4), [1, 0, 0, 0], (0, 0.5))
    frame = build_perp_frame(g, curve, [0, 1, 0, 0])
    assert np.allclose(tidal_force_matrix(g, curve, frame, 0.3), -np.eye(3), atol=1e-10)
    # comoving FLRW observer: tidal matrix is -(a''/a) Id = p (1 - p) / t^2 Id
    p = 0.5
    g = build("FlrwToy", p=p, n=4)
    curve = integrate_geodesic(g, [1.0, 0, 0, 0], [1, 0, 0, 0], (0, 1.0))
    frame = build_perp_frame(g, curve, [0, 1, 0, 0])
    for s in (0.0, 0.5, 1.0):
        want = p * (1 - p) / (1 + s) ** 2
        assert np.allclose(tidal_force_matrix(g, curve, frame, s), want * np.eye(3), atol=1e-9)


def test_tidal_lower_bound_check():
    assert tidal_lower_bound_check([np.diag([1.1, -0.5, -0.5])], 1.0, 1.0)
    assert not tidal_lower_bound_check([np.diag([0.9, -0.5, -0.5])], 1.0, 1.0)
    assert not tidal_lower_bound_check([np.diag([1.1, -1.5, 0])], 1.0, 1.0)


def test_energy_conditions_flat_and_slab():
    fam = build_family(build("Minkowski", n=3), Mollifier(3), epsilons=[0.125, 0.0625], A=0.5)
    rep = check_timelike_ec(fam, per_axis=3, directions=8)
    assert rep.passed and max(abs(m) for m in rep.min_value) < 1e-12
    slab = build("NecSlab", beta=-0.5, n=3)
    fam = build_family(slab, Mollifier(3), epsilons=[0.125, 0.0625], A=1.0)
    rep = check_null_ec(fam, per_axis=5, directions=16)
    assert not rep.passed and rep.threshold is None
    assert max(rep.min_value) < -0.01


def test_energy_condition_parameters():
    fam = build_family(build("Minkowski", n=3), Mollifier(3), epsilons=[0.125], A=0.5)
    with pytest.raises(ParameterError):
        check_timelike_ec(fam, kappa=0.1)
    with pytest.raises(ParameterError):
        check_null_ec(fam, c1=2.0, c2=1.0)


def test_genericity_report_is_seeded_and_flat_fails():
    g = build("Minkowski", n=4)
    fam = build_family(g, Mollifier(4), epsilons=[0.125, 0.0625], A=0.5)
    curve = integrate_geodesic(g, np.zeros(4), [1, 0, 0, 0], (0, 0.5))
    X, V = VectorField.constant([1, 0, 0, 0]), VectorField.constant([0, 1, 0, 0])
    a = check_genericity(fam, curve, X, V, c=0.01, nperturb=4, seed=2)
    b = check_genericity(fam, curve, X, V, c=0.01, nperturb=4, seed=2)
    assert not a.passed and a.min_value == b.min_value
    with pytest.raises(ParameterError):
        check_genericity(fam, curve, X, VectorField.constant([1, 0.5, 0, 0]))


def test_fibonacci_directions_unit():
    for dim in (1, 2, 3):
        d = fibonacci_directions(dim, 16)
        assert np.allclose(np.linalg.norm(d, axis=1), 1)
    with pytest.raises(ParameterError):
        fibonacci_directions(4, 8)
