import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from c1spacetime import ParameterError, build
from c1spacetime.submanifolds import (DegenerateMetricError, SubmanifoldPatch, TrappedData, coordinate_plane,
                                      coordinate_sphere, focal_experiment, trapped_certificate)

U = np.array([0.9, 0.4])


def inward_null(patch, u):
    x = patch.point(u)
    rhat = x[1:] / np.linalg.norm(x[1:])
    return np.concatenate([[1.0], -rhat])


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 1.8), st.floats(0.2, 2.9), st.floats(-3.0, 3.0))
def test_sphere_convergence_is_inverse_radius(rho, th, ph):
    S = coordinate_sphere(build("Minkowski", n=4), [0, 0, 0], rho)
    u = np.array([th, ph])
    nu = inward_null(S, u)
    assert S.convergence(u, nu) == pytest.approx(1 / rho, rel=1e-10)
    out = nu.copy()
    out[1:] *= -1
    assert S.convergence(u, out) == pytest.approx(-1 / rho, rel=1e-10)


def test_circle_in_three_dimensions():
    S = coordinate_sphere(build("Minkowski", n=3), [0.1, 0], 0.5)
    u = np.array([0.3])
    x = S.point(u)
    rhat = (x[1:] - [0.1, 0]) / 0.5
    assert S.convergence(u, np.concatenate([[1.0], -rhat])) == pytest.approx(2.0, rel=1e-10)


def test_frames_are_orthonormal():
    g = build("DeSitterToy", H=1.0, n=4)
    S = coordinate_sphere(g, [0, 0, 0], 0.8, t0=0.2)
    gm = g.metric(S.point(U))
    E, N = S.tangent_frame(U), S.normal_frame(U)
    F = np.vstack([E, N])
    assert np.allclose(F @ gm @ F.T, np.diag([1, 1, -1, 1]), atol=1e-12)
    for nu in S.null_normals(U):
        assert abs(nu @ gm @ nu) < 1e-12


@pytest.mark.parametrize("rho", [0.5, 1.0, 2.0])
def test_focal_point_of_round_sphere(rho):
    S = coordinate_sphere(build("Minkowski", n=4), [0, 0, 0], rho, t0=-1.0)
    rep = focal_experiment(S.metric, S, U, inward_null(S, U), b=1.5 * rho)
    assert rep.found and rep.not_maximising
    assert rep.t_star == pytest.approx(rho, abs=1e-3 * rho)
    assert rep.residuals["raychaudhuri"] < 1e-6


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_focal_parameter_scales_inversely(lam):
    S = coordinate_sphere(build("Minkowski", n=4), [0, 0, 0], 1.0, t0=-0.5)
    rep = focal_experiment(S.metric, S, U, lam * inward_null(S, U), b=1.5 / lam)
    assert rep.c == pytest.approx(lam, rel=1e-10)
    assert rep.t_star == pytest.approx(1 / lam, abs=1e-3 / lam)


def test_focal_rejects_bad_inputs():
    g = build("Minkowski", n=4)
    S = coordinate_sphere(g, [0, 0, 0], 1.0)
    nu = inward_null(S, U)
    with pytest.raises(ParameterError):
        focal_experiment(g, S, U, [1.0, 0, 0, 0], b=2.0)
    with pytest.raises(ParameterError):
        focal_experiment(g, S, U, -nu * np.array([-1, 1, 1, 1]), b=2.0)
    with pytest.raises(ParameterError):
        focal_experiment(g, S, U, nu, b=0.5)
    P = coordinate_plane(g, [0, 0, 0, 0], [2, 3])
    with pytest.raises(ParameterError):
        focal_experiment(g, P, np.zeros(2), [1.0, 1.0, 0, 0], b=1.0)


def test_timelike_patch_is_degenerate():
    g = build("Minkowski", n=4)
    P = coordinate_plane(g, [0, 0, 0, 0], [0, 1])
    with pytest.raises(DegenerateMetricError):
        P.tangent_frame(np.zeros(2))


def test_second_fundamental_form_needs_tangent_vectors():
    S = coordinate_sphere(build("Minkowski", n=4), [0, 0, 0], 1.0)
    with pytest.raises(ParameterError):
        S.second_fundamental_form(U, [1.0, 0, 0, 0], [1.0, 0, 0, 0])


SAMPLES = np.array([[0.7, 0.3], [1.5, 2.0], [2.5, -1.0]])


def test_minkowski_spheres_are_untrapped():
    S = coordinate_sphere(build("Minkowski", n=4), [0, 0, 0], 0.5)
    cert = trapped_certificate(TrappedData([S], [SAMPLES]))
    assert not cert["trapped"] and not cert["H_past_timelike"]
    assert cert["min_k"] == pytest.approx(-2.0, rel=1e-9)


@pytest.mark.parametrize("rho", [0.5, 1.2, 1.8])
def test_contracting_de_sitter_traps_large_spheres(rho):
    # on the slice t = 0 of a contracting patch the null expansions are 1 -/+ 1/rho
    S = coordinate_sphere(build("DeSitterToy", H=-1.0, n=4), [0, 0, 0], rho)
    cert = trapped_certificate(TrappedData([S], [SAMPLES]))
    assert cert["min_k"] == pytest.approx(1 - 1 / rho, rel=1e-9)
    assert cert["trapped"] is (rho > 1)


def test_sphere_and_patch_validation():
    with pytest.raises(ParameterError):
        coordinate_sphere(build("Minkowski", n=4), [0, 0], 1.0)
    with pytest.raises(ParameterError):
        coordinate_sphere(build("Minkowski", n=2), [0], 1.0)
    assert isinstance(coordinate_plane(build("Minkowski", n=4), np.zeros(4), [1, 2]), SubmanifoldPatch)
