import numpy as np
import pytest

from c1spacetime import ParameterError, build
from c1spacetime.branching import BranchingError, branch_probe, similarity_constant, transverse_directions
from oracles import FROZEN, rk4_branching, similarity_K


def test_similarity_constant_matches_reduced_ode():
    assert similarity_K(0.5, 1.0, 2.35) == pytest.approx(FROZEN["similarity_K_px2.35"], rel=1e-14)
    m, K = similarity_constant(0.5, 1.0, 2.35)
    assert m == 4.0
    assert K == pytest.approx(FROZEN["similarity_K_px2.35"], rel=1e-12)
    for alpha in (0.2, 0.7):
        m, K = similarity_constant(alpha, 2.0, 1.0)
        k = 0.5 * 2.0 * (1 + alpha)
        # y = K t^m solves y'' = k y^alpha
        assert m * (m - 1) * K == pytest.approx(k * K ** alpha, rel=1e-12)


def test_transverse_directions_orthonormal():
    v = np.array([3.35, 2.35, 0.0])
    E = transverse_directions(v)
    assert E.shape == (2, 3)
    assert np.allclose(E @ E.T, np.eye(2))
    assert np.allclose(E @ v, 0)


@pytest.fixture(scope="module")
def on_axis():
    g = build("BranchingStatic", alpha=0.5, kappa=1.0, n=3)
    return branch_probe(g, [0, 0, 0], [3.35, 2.35, 0], [1e-8, 1e-10, 1e-12, 1e-14, 1e-16])


def test_on_axis_probe_finds_branches(on_axis):
    assert on_axis.branch_count == 3
    ys = sorted(c["terminal"][2] for c in on_axis.clusters)
    assert ys[1] == 0.0
    assert ys[0] == pytest.approx(-ys[2], rel=1e-9)


def test_branch_matches_fine_step_reference(on_axis):
    top = max(on_axis.clusters, key=lambda c: c["terminal"][2])["terminal"]
    ref = rk4_branching(1.0, 0.5, [0, 0, 1e-16], [3.35, 2.35, 0], 1.0, 20000)
    assert abs(top[2] - ref[2]) < 1e-3


def test_report_json_fields(on_axis):
    js = on_axis.to_json()
    assert set(js) >= {"branch_count", "min_separation", "clusters", "limits", "cluster_tol"}
    assert len(js["limits"]) == 4


@pytest.mark.parametrize("name", ["Minkowski", "FlrwToy", "DeSitterToy", "NecSlab"])
def test_smooth_metrics_do_not_branch(name):
    g = build(name, n=3)
    center = 0.5 * (g.chart.lower + g.chart.upper)
    rep = branch_probe(g, center, [1.0, 0.2, -0.1], [1e-6, 1e-8], span=(0, 0.3))
    assert rep.branch_count == 1 and rep.min_separation is None
    assert any("smooth" in n for n in rep.notes)


def test_probe_validation():
    g = build("BranchingStatic", n=3)
    with pytest.raises(ParameterError):
        branch_probe(g, [0, 0, 0], [1, 0, 0], [1e-8])
    with pytest.raises(BranchingError):
        branch_probe(g, [0, 0, 0], [1, 0, 0.9], [1e-8, 1e-9], span=(0, 5))


def test_reduced_two_dimensional_model_branches():
    g = build("BranchingStatic", n=2)
    rep = branch_probe(g, [0, 0], [1.0, 0.0], [1e-10, 1e-12, 1e-14], span=(0, 2))
    # one transverse axis, so the two signed limits are the two branches
    assert rep.branch_count == 2 and rep.min_separation > 0.1
