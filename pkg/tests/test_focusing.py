import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from c1spacetime import ParameterError
from c1spacetime.focusing import (FocusingSearchError, HypothesisError, TidalProfile, comparison_profile,
                                  detect_conjugate, focusing_experiment, focusing_margin, integrate_jacobi,
                                  raychaudhuri_residual, riccati_comparison_check, select_focusing_constants,
                                  verify_focusing_hypotheses)
from oracles import riccati_blow_up


def point_start(profile, t0, span):
    d = profile.d
    return integrate_jacobi(profile, t0, np.zeros((d, d)), np.eye(d), span)


def test_profiles():
    P = TidalProfile.constant([1.0, 2.0])
    assert np.array_equal(P(3.0), np.diag([1.0, 2.0])) and P.d == 2
    B = TidalProfile.bump(np.eye(3), 0.5, 0.2)
    assert np.array_equal(B(0.4), np.eye(3))
    assert np.allclose(B(0.6), 0.5 * np.eye(3))
    assert not B(0.8).any()
    assert B.knots == (-0.7, -0.5, 0.5, 0.7)
    rep = TidalProfile(( -1.0, 1.0), B.sampler, 3).check(lipschitz=10.0)
    assert rep["symmetric"] and rep["continuous"]


@pytest.mark.parametrize("c", [0.25, 1.0, 4.0])
def test_isotropic_closed_form(c):
    P = TidalProfile.constant(c * np.eye(3))
    traj = point_start(P, 0.0, (0.0, 0.9 * math.pi / math.sqrt(c)))
    r = math.sqrt(c)
    for t in np.linspace(0.05, 0.85 * math.pi / r, 7):
        assert np.allclose(traj.A(t), math.sin(r * t) / r * np.eye(3), atol=1e-11)
        assert traj.theta(t) == pytest.approx(3 * r / math.tan(r * t), rel=1e-8)
        assert np.max(np.abs(traj.shear(t))) < 1e-8 * max(1.0, abs(traj.theta(t)))
    assert traj.lagrange_residual() < 1e-12
    assert traj.jacobi_residual() < 1e-6


@pytest.mark.parametrize("c,d", [(0.25, 3), (1.0, 3), (4.0, 3), (1.0, 2), (2.0, 1)])
def test_first_conjugate_point(c, d):
    P = TidalProfile.constant(c * np.eye(d))
    t_star = detect_conjugate(point_start(P, 0.0, (0.0, 4.0 / math.sqrt(c))))
    assert t_star == pytest.approx(math.pi / math.sqrt(c), abs=1e-9)


def test_anisotropic_first_zero_wins():
    P = TidalProfile.constant([4.0, 0.25])
    assert detect_conjugate(point_start(P, 0.0, (0.0, 8.0))) == pytest.approx(math.pi / 2, abs=1e-9)


def test_backward_direction():
    P = TidalProfile.constant(np.eye(2))
    traj = integrate_jacobi(P, 1.0, np.zeros((2, 2)), -np.eye(2), (1.0, -4.0))
    assert detect_conjugate(traj) == pytest.approx(1.0 - math.pi, abs=1e-9)


def test_flat_has_no_conjugate_point():
    P = TidalProfile.constant(np.zeros((3, 3)))
    assert detect_conjugate(point_start(P, 0.0, (0.0, 1000.0))) is None


def test_parallel_start_focuses_at_quarter_period():
    P = TidalProfile.constant(np.eye(2))
    traj = integrate_jacobi(P, 0.0, np.eye(2), np.zeros((2, 2)), (0.0, 3.0))
    assert detect_conjugate(traj) == pytest.approx(math.pi / 2, abs=1e-9)


def random_profile(seed, d=3):
    rng = np.random.default_rng(seed)
    M0 = rng.normal(size=(d, d))
    M1 = rng.normal(size=(d, d))
    M0, M1 = M0 + M0.T, M1 + M1.T

    def sample(t):
        return 0.3 * M0 + 0.2 * math.sin(1.7 * t) * M1 + 0.5 * np.eye(d)

    return TidalProfile((-5.0, 5.0), sample, d)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_lagrange_and_raychaudhuri_invariants(seed):
    P = random_profile(seed)
    traj = point_start(P, 0.0, (0.0, 3.0))
    t_star = detect_conjugate(traj)
    end = 3.0 if t_star is None else 0.9 * t_star
    assert traj.lagrange_residual() < 1e-10
    assert raychaudhuri_residual(traj, window=(0.0, end)) < 1e-6


def test_state_exposes_riccati_quantities():
    P = TidalProfile.constant(np.eye(2))
    traj = point_start(P, 0.0, (0.0, 2.0))
    st_ = traj.state(1.0)
    assert st_.theta == pytest.approx(2 / math.tan(1.0), rel=1e-9)
    assert np.allclose(st_.B, traj.Adot(1.0) @ np.linalg.inv(traj.A(1.0)))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.05, 5.0), st.floats(-3.0, 3.0), st.floats(-2.0, 2.0),
       st.integers(1, 4))
def test_comparison_closed_forms_solve_riccati(c, C, f, t1, d):
    prof = comparison_profile(c, C, f, t1, d)
    ts = np.linspace(t1, min(prof.blow_up, t1 + 5.0) - 1e-3, 200)
    r1, r2 = prof.riccati_residuals(ts)
    assert np.max(r1) < 1e-12
    if prof._neg_branch()[0] == "coth" and f < 0:
        # coth branch with f < -sqrt(C) has its own pole; stay before it
        ts = ts[np.abs(prof.H_neg(ts)) < 1e6]
        r2 = prof.riccati_residuals(ts)[1]
    assert np.max(r2) < 1e-12
    assert prof.H_pos(t1) == pytest.approx(d * f, rel=1e-12, abs=1e-12)
    assert prof.H_neg(t1) == pytest.approx(d * f, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("c,f,t1", [(1.0, 0.3, 0.0), (0.25, -1.0, 2.0), (4.0, 10.0, -1.0)])
def test_blow_up_formula_against_integration(c, f, t1):
    lo, hi = riccati_blow_up(c, f, t1)
    tb = comparison_profile(c, 1.0, f, t1, 3).blow_up
    assert lo - 1e-6 <= tb <= hi + 1e-6


def test_comparison_validation():
    with pytest.raises(ParameterError):
        comparison_profile(0.0, 1.0, 0.0, 0.0, 3)


def test_riccati_comparison_orders_stronger_curvature():
    f = 0.4
    P = TidalProfile.constant(1.5 * np.eye(3))
    traj = integrate_jacobi(P, 0.0, np.eye(3), f * np.eye(3), (0.0, 3.0))
    prof = comparison_profile(1.0, 1.0, f, 0.0, 3)
    out = riccati_comparison_check(traj, prof, (0.0, 1.0))
    assert out["ordering"] is True and out["min_gap"] >= 0
    with pytest.raises(ParameterError):
        riccati_comparison_check(traj, comparison_profile(1.0, 1.0, 0.1, 0.0, 3), (0.0, 1.0))


def test_margin_grows_with_T():
    vals = [focusing_margin(1.0, 0.7, 1e-3, T, 3) for T in (200.0, 800.0, 3200.0)]
    assert vals[0] < vals[1] < vals[2]


@pytest.fixture(scope="module")
def constants():
    return select_focusing_constants(1.0, 0.7, 3)


def test_selected_constants(constants):
    K = constants
    assert K.margin > 0 and K.T > 2 * K.r and 1e-8 <= K.delta <= K.c
    assert focusing_margin(K.c, K.r, K.delta, K.T, K.d) == pytest.approx(K.margin)
    js = K.to_json()
    assert set(js) >= {"c", "r", "delta", "T", "f", "nu"}
    assert js["nu"] == pytest.approx(12 / K.T)


def test_constant_search_validation():
    with pytest.raises(ParameterError):
        select_focusing_constants(1.0, 1.0)
    with pytest.raises(ParameterError):
        select_focusing_constants(-1.0, 0.1)
    with pytest.raises(FocusingSearchError):
        select_focusing_constants(1.0, 0.1)


def test_bump_profile_focuses(constants):
    P = TidalProfile.bump(np.diag([1.05, -0.25, -0.25]), constants.r, 0.2)
    rep = focusing_experiment(P, constants)
    assert rep.passed and rep.t_star <= constants.T
    assert rep.residuals["raychaudhuri"] < 1e-6
    js = rep.to_json()
    assert js["conjugate_or_focal"]["within_T"] is True


def test_violating_profile_makes_no_claim(constants):
    P = TidalProfile.bump(np.diag([0.95, -0.25, -0.25]), constants.r, 0.2)
    with pytest.raises(HypothesisError) as err:
        focusing_experiment(P, constants)
    assert err.value.worst < 0


def test_hypothesis_check_with_C(constants):
    P = TidalProfile.bump(np.diag([1.05, -0.25, -0.25]), constants.r, 0.2)
    assert verify_focusing_hypotheses(P, constants, C=0.5)["verified"]
    assert not verify_focusing_hypotheses(P, constants, C=0.2)["verified"]
    with pytest.raises(ParameterError):
        focusing_experiment(TidalProfile.constant(np.eye(2)), constants)
