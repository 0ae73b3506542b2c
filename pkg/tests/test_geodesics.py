import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from c1spacetime import ParameterError, build
from c1spacetime.geodesics import (build_perp_frame, extend_cylindrical, geodesic_family_convergence,
                                   householder_to_first_axis, integrate_geodesic, parallel_transport)
from c1spacetime.mollify import Mollifier, build_family
from oracles import rk4_branching


def test_minkowski_lines():
    g = build("Minkowski", n=4)
    sol = integrate_geodesic(g, [0, 0.1, 0, 0], [1, 0.3, -0.2, 0.1], (0, 2))
    s = np.linspace(0, 2, 11)
    want = np.array([0, 0.1, 0, 0]) + np.outer(s, [1, 0.3, -0.2, 0.1])
    assert np.max(np.abs(sol.position(s) - want)) < 1e-13


def test_de_sitter_null_geodesic_closed_form():
    # p_x = e^{2t} x' is conserved and e^t = 1 + p s, x = 1 - 1/(1 + p s)
    g = build("DeSitterToy", H=1.0, n=2)
    p = 1.3
    sol = integrate_geodesic(g, [0, 0], [p, p], (0, 0.5))
    s = np.linspace(0, 0.5, 21)
    pos = sol.position(s)
    assert np.max(np.abs(np.exp(pos[:, 0]) - (1 + p * s))) < 1e-9
    assert np.max(np.abs(pos[:, 1] - (1 - 1 / (1 + p * s)))) < 1e-9


def test_comoving_flrw_observer():
    g = build("FlrwToy", p=2.0)
    sol = integrate_geodesic(g, [1.0, 0.2, 0.1, 0], [1, 0, 0, 0], (0, 1.5))
    assert np.max(np.abs(sol.position(sol.samples(30))[:, 1:] - [0.2, 0.1, 0])) < 1e-13


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.6, 0.6), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_norm_conserved(vx, vy, t0):
    g = build("DeSitterToy", H=1.0, n=4)
    sol = integrate_geodesic(g, [t0, 0, 0, 0], [1, vx, vy, 0], (0, 0.3))
    nrm = sol.norm(sol.samples(50))
    assert np.max(np.abs(nrm - nrm[0])) < 1e-8 * max(1, abs(nrm[0]))
    assert np.max(sol.equation_residual(sol.samples(20))) < 1e-5


def test_branching_metric_against_fixed_step_reference():
    g = build("BranchingStatic", n=3)
    p, v = [0, 0, 0.25], [1.6, 1.2, 0]
    ref = rk4_branching(1.0, 0.5, p, v, 1.0, 4000)
    # default tolerances for C1,alpha metrics are (1e-6, 1e-8)
    assert np.max(np.abs(integrate_geodesic(g, p, v, (0, 1)).state(1.0) - ref)) < 1e-6
    tight = integrate_geodesic(g, p, v, (0, 1), rtol=1e-12, atol=1e-14)
    assert np.max(np.abs(tight.state(1.0) - ref)) < 1e-10


def test_exit_truncates():
    g = build("KinkedWave")
    sol = integrate_geodesic(g, [0, 0.5, 0, 0], [1, 0.9, 0, 0], (0, 10))
    assert sol.truncated and sol.t_span[1] < 10
    assert sol.t_span[1] == pytest.approx(1.5 / 0.9, rel=1e-6)


def test_input_validation():
    g = build("Minkowski", n=3)
    with pytest.raises(ParameterError):
        integrate_geodesic(g, [0, 0, 0], [0, 0, 0], (0, 1))
    with pytest.raises(ParameterError):
        integrate_geodesic(g, [5, 0, 0], [1, 0, 0], (0, 1))


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_transport_preserves_inner_products(a, b):
    g = build("DeSitterToy", H=1.0, n=4)
    curve = integrate_geodesic(g, [-0.2, 0, 0, 0], [1.1, 0.3, 0.1, 0], (0, 0.8))
    W = parallel_transport(g, curve, np.array([a, b]))
    s = curve.samples(9)
    gram = np.einsum("sij,sai,sbj->sab", g.metric(curve.position(s)), W(s), W(s))
    assert np.max(np.abs(gram - gram[0])) < 1e-9


def test_transport_from_interior_point():
    g = build("FlrwToy")
    curve = integrate_geodesic(g, [1.0, 0, 0, 0], [1, 0.2, 0, 0], (0, 1))
    W = parallel_transport(g, curve, [0, 1.0, 0, 0], t0=0.5)
    assert np.allclose(W(0.5), [0, 1, 0, 0])
    with pytest.raises(ParameterError):
        parallel_transport(g, curve, [0, 1.0, 0, 0], t0=2.0)


def test_timelike_frame():
    g = build("FlrwToy")
    curve = integrate_geodesic(g, [1.0, 0, 0, 0], [1.2, 0.2, 0, 0], (0, 1))
    frame = build_perp_frame(g, curve, [0, 0, 1, 0])
    assert frame.d == 3 and not frame.null
    assert frame.certificate["max_error"] < 1e-9
    E = frame.all_legs(0.7)
    u = curve.velocity(0.7)
    assert np.allclose(E[-1], u / np.sqrt(-curve.norm(0.7)), atol=1e-9)


def test_null_frame():
    g = build("DeSitterToy", H=1.0, n=4)
    curve = integrate_geodesic(g, [0, 0, 0, 0], [1, 1, 0, 0], (0, 0.5))
    frame = build_perp_frame(g, curve, [0, 0, 1, 0])
    assert frame.d == 2 and frame.null
    assert frame.certificate["max_error"] < 1e-9
    E = frame.all_legs(0.4)
    assert np.allclose(E[-2] + E[-1], curve.velocity(0.4), atol=1e-9)


def test_frame_seed_checks():
    g = build("Minkowski", n=4)
    curve = integrate_geodesic(g, np.zeros(4), [1, 0, 0, 0], (0, 1))
    with pytest.raises(ParameterError):
        build_perp_frame(g, curve, [1, 1, 0, 0])
    with pytest.raises(ParameterError):
        build_perp_frame(g, curve, [0, 0, 0, 0])


def test_householder():
    u = np.array([0.3, -1.0, 2.0])
    L = householder_to_first_axis(u)
    assert np.allclose(L @ u, [np.linalg.norm(u), 0, 0])
    assert np.allclose(L @ L.T, np.eye(3))


def test_cylindrical_extension_restricts_to_curve():
    g = build("Minkowski", n=3)
    curve = integrate_geodesic(g, [0, 0, 0], [1, 0.3, 0], (0, 1))
    V = parallel_transport(g, curve, [0, 0, 1.0])
    ext = extend_cylindrical(curve, V, 0.5)
    pts = curve.position(np.array([0.2, 0.5, 0.8]))
    assert np.allclose(ext.parameter_of(pts), [0.2, 0.5, 0.8], atol=1e-12)
    assert np.allclose(ext.field(pts), [[0, 0, 1.0]] * 3)
    J = ext.adapted_jacobian(pts @ ext.L.T)
    assert np.allclose(J[:, 1:], 0)


def test_family_convergence_small_grid():
    fam = build_family(build("DeSitterToy", n=3), Mollifier(3), epsilons=[0.125, 0.0625, 0.03125], A=1.0)
    tab = geodesic_family_convergence(fam, [-0.3, 0.1, 0], [1.2, 0.3, 0.2], (0, 0.5))
    c1 = tab.column("c1")
    assert np.all(np.diff(c1) < 0)
    # smooth source: the deviation is second order in epsilon
    assert c1[0] / c1[-1] == pytest.approx(16, rel=0.05)


def test_csv_output(tmp_path):
    g = build("Minkowski", n=2)
    sol = integrate_geodesic(g, [0, 0], [1, 0.5], (0, 1))
    path = tmp_path / "geo.csv"
    sol.write_csv(path, count=5)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "x0", "x1", "v0", "v1", "g(v,v)"] and len(rows) == 6
    assert float(rows[-1][-1]) == pytest.approx(-0.75)
