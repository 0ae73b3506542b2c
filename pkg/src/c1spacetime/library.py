"""Built-in example metrics covering smooth, C^{1,alpha} and NEC-violating cases.

All built-ins are diagonal with each varying entry a function of a single
coordinate.  Coordinates are ``(t, x, y, z)`` truncated to the dimension.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import SMOOTH, ChartBox, MetricField, ParameterError, c1alpha

Profile = tuple[int, int, Callable, Callable, Callable | None]


def diagonal_metric(name, chart, base, profiles: list[Profile], regularity=SMOOTH,
                    breakpoints=None, params=None) -> MetricField:
    """Diagonal metric whose entry ``i`` is ``f(x[axis])`` for each profile
    ``(i, axis, f, df, ddf)`` and ``base[i]`` otherwise."""
    n = chart.dim
    base = np.asarray(base, dtype=float)
    smooth = all(p[4] is not None for p in profiles)
    axes = sorted({p[1] for p in profiles})

    def components(x):
        g = np.zeros(x.shape[:-1] + (n, n))
        for i in range(n):
            g[..., i, i] = base[i]
        for i, a, f, _, _ in profiles:
            g[..., i, i] = f(x[..., a])
        return g

    def derivatives(x):
        dg = np.zeros(x.shape[:-1] + (n, n, n))
        for i, a, _, df, _ in profiles:
            dg[..., a, i, i] = df(x[..., a])
        return dg

    def second(x):
        ddg = np.zeros(x.shape[:-1] + (n, n, n, n))
        for i, a, _, _, ddf in profiles:
            ddg[..., a, a, i, i] = ddf(x[..., a])
        return ddg

    return MetricField(name=name, chart=chart, components=components, derivatives=derivatives,
                       regularity=regularity, second_derivatives=second if smooth else None,
                       depends_on=tuple(axes), breakpoints=dict(breakpoints or {}),
                       params=dict(params or {}))


def _check_dim(n, allowed=(2, 3, 4)):
    if n not in allowed:
        raise ParameterError(f"dimension {n} not in {allowed}")


def minkowski(n: int = 4, half_width: float = 5.0) -> MetricField:
    _check_dim(n)
    base = [-1.0] + [1.0] * (n - 1)
    return diagonal_metric("Minkowski", ChartBox.cube(n, half_width), base, [], params={"n": n})


def flrw_toy(p: float = 2.0, n: int = 4) -> MetricField:
    """Power-law scale factor ``a(t) = t**p`` on ``t in [0.5, 3]``."""
    _check_dim(n)
    if p <= 0:
        raise ParameterError("FlrwToy exponent must be positive")
    q = 2.0 * p
    chart = ChartBox([0.5] + [-2.0] * (n - 1), [3.0] + [2.0] * (n - 1))
    prof = [(i, 0, lambda t: t ** q, lambda t: q * t ** (q - 1), lambda t: q * (q - 1) * t ** (q - 2))
            for i in range(1, n)]
    return diagonal_metric("FlrwToy", chart, [-1.0] + [1.0] * (n - 1), prof, params={"p": float(p), "n": n})


def de_sitter_toy(H: float = 1.0, n: int = 4) -> MetricField:
    """Flat slicing ``-dt^2 + exp(2 H t) dx^2``; negative ``H`` gives a contracting toy."""
    _check_dim(n)
    if H == 0:
        raise ParameterError("DeSitterToy needs H != 0")
    chart = ChartBox([-1.0] + [-2.0] * (n - 1), [1.0] + [2.0] * (n - 1))
    prof = [(i, 0, lambda t: np.exp(2 * H * t), lambda t: 2 * H * np.exp(2 * H * t),
             lambda t: 4 * H * H * np.exp(2 * H * t)) for i in range(1, n)]
    return diagonal_metric("DeSitterToy", chart, [-1.0] + [1.0] * (n - 1), prof, params={"H": float(H), "n": n})


def _power_kink(kappa, alpha, center=0.0):
    """Return ``kappa*|s-center|^(1+alpha)`` and its derivative."""
    def f(s):
        return kappa * np.abs(s - center) ** (1 + alpha)

    def df(s):
        u = s - center
        return kappa * (1 + alpha) * np.abs(u) ** alpha * np.sign(u)

    return f, df


def _check_holder(alpha, kappa, label="kappa"):
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha={alpha} not in (0, 1)")
    if kappa <= 0:
        raise ParameterError(f"{label}={kappa} must be positive")


def branching_static(alpha: float = 0.5, kappa: float = 1.0, n: int = 3) -> MetricField:
    """``-dt^2 + (1 + kappa|y|^(1+alpha)) dx^2 + dy^2`` in coordinates (t, x, y[, z]).

    For ``n == 2`` the reduction ``-(1 - kappa|y|^(1+alpha)) dt^2 + dy^2`` in
    coordinates (t, y) is used, which has the same non-Lipschitz force
    pushing geodesics away from ``y = 0``.
    """
    _check_dim(n)
    _check_holder(alpha, kappa)
    k, dk = _power_kink(kappa, alpha)
    reg = c1alpha(alpha)
    params = {"alpha": float(alpha), "kappa": float(kappa), "n": n}
    if n == 2:
        h = min(1.0, (0.5 / kappa) ** (1 / (1 + alpha)))
        chart = ChartBox([-1.0, -h], [4.0, h])
        prof = [(0, 1, lambda s: -1.0 + k(s), dk, None)]
        return diagonal_metric("BranchingStatic", chart, [-1.0, 1.0], prof, reg, {1: (0.0,)}, params)
    lo = [-4.0, -4.0, -1.0] + [-2.0] * (n - 3)
    hi = [4.0, 4.0, 1.0] + [2.0] * (n - 3)
    prof = [(1, 2, lambda s: 1.0 + k(s), dk, None)]
    return diagonal_metric("BranchingStatic", ChartBox(lo, hi), [-1.0] + [1.0] * (n - 1), prof, reg,
                           {2: (0.0,)}, params)


def kinked_wave(alpha: float = 0.5, A: float = 1.0, x0: float = 0.0, n: int = 4) -> MetricField:
    """``-dt^2 + dx^2 + (1 + A|x-x0|^(1+alpha)) dy^2 (+ dz^2)`` in (t, x, y[, z])."""
    _check_dim(n, (3, 4))
    _check_holder(alpha, A, "A")
    k, dk = _power_kink(A, alpha, x0)
    chart = ChartBox.cube(n, 2.0)
    prof = [(2, 1, lambda s: 1.0 + k(s), dk, None)]
    params = {"alpha": float(alpha), "A": float(A), "x0": float(x0), "n": n}
    return diagonal_metric("KinkedWave", chart, [-1.0] + [1.0] * (n - 1), prof, c1alpha(alpha),
                           {1: (float(x0),)}, params)


def nec_slab(beta: float = -0.5, n: int = 4) -> MetricField:
    """Static slab ``-(1 + beta x^2) dt^2 + dx^2 + ...``; null energy fails for beta < 0."""
    _check_dim(n)
    if not -1 < beta < 1:
        raise ParameterError("NecSlab needs |beta| < 1 to stay Lorentzian on the box")
    chart = ChartBox.cube(n, 1.0)
    prof = [(0, 1, lambda s: -(1 + beta * s * s), lambda s: -2 * beta * s, lambda s: np.full_like(s, -2 * beta))]
    return diagonal_metric("NecSlab", chart, [-1.0] + [1.0] * (n - 1), prof,
                           params={"beta": float(beta), "n": n})


@dataclass(frozen=True)
class MetricInfo:
    factory: Callable[..., MetricField]
    params: dict
    regularity: str
    summary: str
    facts: tuple[str, ...]


REGISTRY: dict[str, MetricInfo] = {
    "Minkowski": MetricInfo(minkowski, {"n": 4}, "smooth", "flat, smooth, Ric=0",
                            ("Christoffel symbols vanish", "Riemann tensor vanishes",
                             "geodesics are straight lines")),
    "FlrwToy": MetricInfo(flrw_toy, {"p": 2.0, "n": 4}, "smooth",
                          "power-law FLRW -dt^2 + t^(2p) dx^2, t in [0.5, 3]",
                          ("Gamma^x_tx = p/t, Gamma^t_xx = p t^(2p-1)",
                           "Ric(d_t, d_t) = -(n-1) p (p-1) / t^2",
                           "comoving curves t -> (t, x0) are geodesics")),
    "DeSitterToy": MetricInfo(de_sitter_toy, {"H": 1.0, "n": 4}, "smooth",
                              "flat-sliced de Sitter -dt^2 + exp(2Ht) dx^2",
                              ("Einstein constant (n-1)H^2: Ric = (n-1) H^2 g",
                               "constant curvature: R(X,Y)Z = H^2 (g(Y,Z)X - g(X,Z)Y)",
                               "tidal matrix along unit timelike geodesics is -H^2 Id")),
    "BranchingStatic": MetricInfo(branching_static, {"alpha": 0.5, "kappa": 1.0, "n": 3}, "C1,alpha",
                                  "static -dt^2 + (1 + kappa|y|^(1+alpha)) dx^2 + dy^2",
                                  ("parameters alpha in (0,1), kappa > 0",
                                   "branching locus y = 0",
                                   "y'' = (kappa (1+alpha)/2) p_x^2/f^2 |y|^alpha sgn(y)")),
    "KinkedWave": MetricInfo(kinked_wave, {"alpha": 0.5, "A": 1.0, "x0": 0.0, "n": 4}, "C1,alpha",
                             "-dt^2 + dx^2 + (1 + A|x-x0|^(1+alpha)) dy^2 + dz^2",
                             ("curvature is a distribution of order 1 concentrated near x = x0",
                              "Ric(d_t, d_t) = 0")),
    "NecSlab": MetricInfo(nec_slab, {"beta": -0.5, "n": 4}, "smooth",
                          "static slab -(1 + beta x^2) dt^2 + dx^2 + ...",
                          ("for null X = d_t/N + d_y with N^2 = 1 + beta x^2: Ric(X,X) = beta/N^4",
                           "null energy condition fails for beta < 0")),
}


def build(name: str, **params) -> MetricField:
    if name not in REGISTRY:
        raise ParameterError(f"unknown metric {name!r}; known: {sorted(REGISTRY)}")
    info = REGISTRY[name]
    unknown = set(params) - set(info.params)
    if unknown:
        raise ParameterError(f"unknown parameters for {name}: {sorted(unknown)}")
    merged = {**info.params, **params}
    return info.factory(**merged)


def describe(name: str) -> str:
    if name not in REGISTRY:
        raise ParameterError(f"unknown metric {name!r}")
    info = REGISTRY[name]
    lines = [f"{name}: {info.summary}", f"  regularity: {info.regularity}",
             "  parameters: " + ", ".join(f"{k}={v}" for k, v in info.params.items())]
    lines += [f"  - {fact}" for fact in info.facts]
    return "\n".join(lines)
