"""Connection coefficients, curvature, distributional Ricci pairing and
energy/genericity condition checks.

Conventions: ``R(X,Y)Z = [nabla_X, nabla_Y]Z - nabla_[X,Y] Z`` with
``R(d_j, d_k) d_i = R^m_ijk d_m`` stored as ``Rm[..., m, i, j, k]`` and
``Ric_ij = R^m_imj``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import (ChartBox, ChartError, Metric, ParameterError, RegularityError, VectorField,
                       inverse_metric)
from .quadrature import graded_edges, panel_rule


def christoffel(gm: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """``Gamma[..., k, i, j] = 1/2 g^{kl} (d_i g_lj + d_j g_il - d_l g_ij)``."""
    lowered = 0.5 * (np.einsum("...ilj->...lij", dg) + np.einsum("...jil->...lij", dg) - dg)
    return np.einsum("...kl,...lij->...kij", inverse_metric(gm), lowered)


def christoffel_derivative(gm, dg, ddg) -> np.ndarray:
    """``dGamma[..., a, k, i, j] = d_a Gamma^k_ij``."""
    ginv = inverse_metric(gm)
    lowered = 0.5 * (np.einsum("...ilj->...lij", dg) + np.einsum("...jil->...lij", dg) - dg)
    dlow = 0.5 * (np.einsum("...ailj->...alij", ddg) + np.einsum("...ajil->...alij", ddg) - ddg)
    dginv = -np.einsum("...kp,...apq,...ql->...akl", ginv, dg, ginv)
    return np.einsum("...akl,...lij->...akij", dginv, lowered) + np.einsum("...kl,...alij->...akij", ginv, dlow)


def riemann(gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    """``R^m_ijk = d_j G^m_ik - d_k G^m_ij + G^m_js G^s_ik - G^m_ks G^s_ij``."""
    t1 = np.einsum("...jmik->...mijk", dgamma)
    quad = np.einsum("...mjs,...sik->...mijk", gamma, gamma)
    return t1 - np.swapaxes(t1, -1, -2) + quad - np.swapaxes(quad, -1, -2)


def ricci_from_riemann(Rm: np.ndarray) -> np.ndarray:
    return np.einsum("...mimj->...ij", Rm)


@dataclass
class CurvatureAt:
    metric: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray


def christoffel_at(g: Metric, x) -> np.ndarray:
    x = g.chart.check(x)
    gm, dg = g.jet(x, 1)
    return christoffel(gm, dg)


def curvature_at(g: Metric, x) -> CurvatureAt:
    """Pointwise curvature of a metric that provides second derivatives."""
    x = g.chart.check(x)
    if g.max_order < 2:
        raise RegularityError(f"{g.name} has no second derivatives; mollify it or use pair_ricci")
    gm, dg, ddg = g.jet(x, 2)
    gam = christoffel(gm, dg)
    Rm = riemann(gam, christoffel_derivative(gm, dg, ddg))
    ric = ricci_from_riemann(Rm)
    scal = np.einsum("...ij,...ij->...", inverse_metric(gm), ric)
    return CurvatureAt(gm, gam, Rm, ric, scal)


def orthonormal_frame(gm: np.ndarray, time_axis: int = 0) -> np.ndarray:
    """``g``-orthonormal frame ``E[..., a, i]`` from Gram-Schmidt on coordinate axes, ``E_0`` timelike."""
    n = gm.shape[-1]
    order = [time_axis] + [a for a in range(n) if a != time_axis]
    E = np.zeros(gm.shape[:-2] + (n, n))
    signs = np.array([-1.0] + [1.0] * (n - 1))
    for a, ax in enumerate(order):
        v = np.zeros(gm.shape[:-2] + (n,))
        v[..., ax] = 1.0
        for b in range(a):
            proj = np.einsum("...ij,...i,...j->...", gm, v, E[..., b, :]) * signs[b]
            v = v - proj[..., None] * E[..., b, :]
        nrm = np.einsum("...ij,...i,...j->...", gm, v, v)
        if np.any(nrm * signs[a] <= 0):
            raise ParameterError("Gram-Schmidt hit a vector of the wrong causal type")
        E[..., a, :] = v / np.sqrt(np.abs(nrm))[..., None]
    return E


def ricci_frame(Rm: np.ndarray, gm: np.ndarray, E: np.ndarray) -> np.ndarray:
    """``Ric(X, Y) = sum_a <E_a,E_a> <R(E_a, X) Y, E_a>`` assembled as a matrix in coordinates."""
    n = gm.shape[-1]
    eta = np.array([-1.0] + [1.0] * (n - 1))
    # <R(E_a, d_k) d_i, E_a> = g_mp R^m_ijk E_a^j E_a^p
    low = np.einsum("...mp,...mijk->...pijk", gm, Rm)
    return np.einsum("a,...aj,...ap,...pijk->...ki", eta, E, E, low)


def ricci_smooth(g: Metric, x, cross_check: bool = False, tol: float = 1e-8) -> np.ndarray:
    """Coordinate Ricci tensor; optionally compared with the frame-contraction route."""
    c = curvature_at(g, x)
    if cross_check:
        alt = ricci_frame(c.riemann, c.metric, orthonormal_frame(c.metric, g.time_axis))
        scale = max(1.0, float(np.max(np.abs(c.ricci))))
        err = float(np.max(np.abs(alt - c.ricci))) / scale
        if err > tol:
            raise ArithmeticError(f"Ricci routes disagree by {err:.3e}")
    return c.ricci


def metricity_residual(gm, dg, gamma) -> np.ndarray:
    """``d_k g_ij - G^l_ki g_lj - G^l_kj g_il``; vanishes for the Levi-Civita connection."""
    a = np.einsum("...lki,...lj->...kij", gamma, gm)
    return dg - a - np.swapaxes(a, -1, -2)


def bianchi_residual(Rm) -> np.ndarray:
    return Rm + np.einsum("...mjki->...mijk", Rm) + np.einsum("...mkij->...mijk", Rm)


def sectional_form(Rm, gm, X, V) -> np.ndarray:
    """``g(R(X, V) V, X)``."""
    return np.einsum("...mp,...mijk,...i,...j,...k,...p->...", gm, Rm, V, X, V, X)


def _bump(s):
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1 - s[inside] ** 2))
    return out


def _bump_prime(s):
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1 - si ** 2)) * (-2 * si / (1 - si ** 2) ** 2)
    return out


_BUMP_MASS = None


def _bump_mass() -> float:
    global _BUMP_MASS
    if _BUMP_MASS is None:
        from scipy import integrate
        _BUMP_MASS = integrate.quad(lambda s: math.exp(-1 / (1 - s * s)), -1, 1, epsabs=0, epsrel=1e-13)[0]
    return _BUMP_MASS


@dataclass(frozen=True)
class TestDensity:
    """Nonnegative product bump of unit mass, ``prod_a phi((x_a - c_a) / h_a) / (Z h_a)``."""

    __test__ = False  # keep pytest from collecting this class

    center: np.ndarray
    widths: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        h = np.broadcast_to(np.asarray(self.widths, dtype=float), c.shape).copy()
        if np.any(h <= 0):
            raise ParameterError("test density widths must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "widths", h)

    @property
    def support(self) -> ChartBox:
        return ChartBox(self.center - self.widths, self.center + self.widths)

    def factors(self, x, axes: Sequence[int]):
        """Per-axis values and derivatives on ``axes``."""
        x = np.asarray(x, dtype=float)
        Z = _bump_mass()
        vals, ders = [], []
        for a in axes:
            s = (x[..., a] - self.center[a]) / self.widths[a]
            vals.append(_bump(s) / (Z * self.widths[a]))
            ders.append(_bump_prime(s) / (Z * self.widths[a] ** 2))
        return vals, ders

    def value_and_gradient(self, x, axes: Sequence[int] | None = None):
        """Density restricted to ``axes`` (the full product when None) and its gradient."""
        x = np.asarray(x, dtype=float)
        n = self.center.size
        axes = list(range(n)) if axes is None else list(axes)
        vals, ders = self.factors(x, axes)
        val = self.weight * np.prod(np.stack(vals, axis=0), axis=0) if vals else np.full(x.shape[:-1], self.weight)
        grad = np.zeros(x.shape)
        for j, a in enumerate(axes):
            others = [vals[i] for i in range(len(axes)) if i != j]
            rest = np.prod(np.stack(others, axis=0), axis=0) if others else 1.0
            grad[..., a] = self.weight * ders[j] * rest
        return val, grad

    def __call__(self, x):
        return self.value_and_gradient(x)[0]


def _active_axes(g: Metric, X: VectorField) -> list[int]:
    xd = getattr(X, "depends_on", None)
    xd = range(g.dim) if xd is None else xd
    return sorted(set(g.depends_on) | set(xd))


# Defaults by count of active axes.  Axes without kinks get one Gauss panel
# (the bump's moments converge fast there: 64 nodes give about 1e-9);
# kinked axes get composite panels graded toward the kink.
_SMOOTH_NODES = {1: 128, 2: 96, 3: 64}
_KINK_RULES = {1: (16, 20), 2: (12, 12)}


def density_rule(omega: TestDensity, axes: Sequence[int], splits: dict[int, Sequence[float]] | None = None,
                 panels: int | None = None, nodes: int | None = None, refine: int = 1, chunk: int = 200_000):
    """Tensor Gauss rule over the support of ``omega`` restricted to ``axes``, in chunks.

    Panels are graded toward the coordinate values in ``splits[axis]``.
    Yields ``(points, weights)`` with points of full dimension (inactive
    axes at the density centre); each chunk holds at most about ``chunk`` points.
    """
    axes = list(axes)
    k = max(len(axes), 1)
    kp, kn = _KINK_RULES.get(k, (6, 8))
    splits = splits or {}
    per_axis = []
    for a in axes:
        lo = omega.center[a] - omega.widths[a]
        hi = omega.center[a] + omega.widths[a]
        sp = [s for s in splits.get(a, ()) if lo < s < hi]
        if sp:
            edges = graded_edges(np.asarray(sp)[None, :], lo, hi, panels=panels or kp, levels=10, ratio=0.15)[0]
            m = nodes or kn
        elif panels is not None:
            edges = np.linspace(lo, hi, panels + 1)
            m = nodes or kn
        else:
            edges = np.array([lo, hi])
            m = nodes or _SMOOTH_NODES.get(k, 48)
        xa, wa = panel_rule(edges, m * refine)
        keep = wa > 0
        per_axis.append((xa[keep], wa[keep]))
    if not axes:
        yield omega.center[None, :].copy(), np.ones(1)
        return
    # the leading axes are looped over so that the trailing block fits in a chunk
    lead = 0
    size = int(np.prod([x.size for x, _ in per_axis]))
    while lead < len(axes) - 1 and size > chunk:
        size //= per_axis[lead][0].size
        lead += 1
    tail_pts = omega.center[None, :].copy()
    tail_w = np.ones(1)
    for j in range(lead, len(axes)):
        xa, wa = per_axis[j]
        tail_pts = np.repeat(tail_pts, xa.size, axis=0)
        tail_pts[:, axes[j]] = np.tile(xa, tail_pts.shape[0] // xa.size)
        tail_w = np.repeat(tail_w, xa.size) * np.tile(wa, tail_w.size)
    for idx in np.ndindex(*[per_axis[j][0].size for j in range(lead)]):
        pts = tail_pts.copy()
        w = tail_w.copy()
        for j, i in enumerate(idx):
            pts[:, axes[j]] = per_axis[j][0][i]
            w = w * per_axis[j][1][i]
        yield pts, w


def _check_support(g: Metric, omega: TestDensity, margin: float = 0.0):
    sup = omega.support
    if not (np.all(sup.lower > g.chart.lower + margin) and np.all(sup.upper < g.chart.upper - margin)):
        raise ChartError("test density support must lie strictly inside the chart")


def pair_ricci(g: Metric, X: VectorField, omega: TestDensity, refine: int = 1, panels=None, nodes=None) -> float:
    """Distributional ``<Ric(X, X), omega>`` of a C1 metric.

    One integration by parts moves the derivative of the connection onto
    ``F^ij = X^i X^j omega``:
    ``int -G^m_ij d_m F^ij + G^m_im d_j F^ij + (G^m_ms G^s_ij - G^m_js G^s_im) F^ij``.
    Only continuous Christoffel symbols are evaluated.
    """
    _check_support(g, omega)
    if X.derivative is None:
        raise RegularityError("pair_ricci needs the Jacobian of X")
    axes = _active_axes(g, X)
    total = 0.0
    for pts, w in density_rule(omega, axes, dict(g.breakpoints), panels, nodes, refine):
        gm, dg = g.jet(pts, 1)
        gam = christoffel(gm, dg)
        Xv = X(pts)
        dX = X.jacobian(pts)
        om, dom = omega.value_and_gradient(pts, axes)
        XX = np.einsum("...i,...j->...ij", Xv, Xv)
        dF = (np.einsum("...mi,...j->...mij", dX, Xv) + np.einsum("...i,...mj->...mij", Xv, dX)) \
            * om[:, None, None, None] + np.einsum("...ij,...m->...mij", XX, dom)
        F = XX * om[:, None, None]
        trace = np.einsum("...mim->...i", gam)
        quad = np.einsum("...mms,...sij->...ij", gam, gam) - np.einsum("...mjs,...sim->...ij", gam, gam)
        integrand = (-np.einsum("...mij,...mij->...", gam, dF) + np.einsum("...i,...jij->...", trace, dF)
                     + np.einsum("...ij,...ij->...", quad, F))
        total += float(np.sum(w * integrand))
    return total


def pair_ricci_smooth(g: Metric, X: VectorField, omega: TestDensity, splits=None, refine: int = 1,
                      panels=None, nodes=None) -> float:
    """``int Ric[g](X, X) omega`` by quadrature of the pointwise Ricci tensor of a smooth metric."""
    _check_support(g, omega)
    axes = _active_axes(g, X)
    total = 0.0
    for pts, w in density_rule(omega, axes, splits, panels, nodes, refine):
        ric = ricci_smooth(g, pts)
        Xv = X(pts)
        om, _ = omega.value_and_gradient(pts, axes)
        total += float(np.sum(w * om * np.einsum("...ij,...i,...j->...", ric, Xv, Xv)))
    return total


def mollified_splits(g: Metric, eps: float) -> dict[int, tuple[float, ...]]:
    """Kinks of ``g`` plus the edges ``b +- eps`` where a mollified member is least regular."""
    return {a: tuple(sorted({b + s * eps for b in bs for s in (-1.0, 0.0, 1.0)})) for a, bs in g.breakpoints.items()}


def fibonacci_directions(dim: int, count: int) -> np.ndarray:
    """Quasi-uniform unit vectors in R^dim (dim 1, 2 or 3)."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    if dim == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        r = np.sqrt(1 - z * z)
        phi = np.pi * (3 - np.sqrt(5)) * i
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    raise ParameterError("direction lattices exist for 1..3 spatial dimensions")


def lattice_points(g: Metric, K: ChartBox, per_axis: int) -> np.ndarray:
    """Grid on ``K`` over the axes the metric varies along; other axes sit at the box centre."""
    center = 0.5 * (K.lower + K.upper)
    D = list(g.depends_on)
    if not D:
        return center[None, :]
    axes = [np.linspace(K.lower[a], K.upper[a], per_axis) for a in D]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.repeat(center[None, :], mesh[0].size, axis=0)
    for j, a in enumerate(D):
        pts[:, a] = mesh[j].ravel()
    return pts


@dataclass
class ConditionReport:
    condition: str
    epsilon_grid: list[float]
    min_value: list[float]
    witness: dict
    passed: bool
    threshold: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"condition": self.condition, "epsilon_grid": self.epsilon_grid, "min_value": self.min_value,
                "witness": self.witness, "pass": self.passed, "epsilon_threshold": self.threshold, **self.extra}


def _threshold(eps: Sequence[float], ok: Sequence[bool]) -> float | None:
    """Largest grid value below which (inclusive) every grid member passes."""
    best = None
    for e, flag in sorted(zip(eps, ok)):
        if not flag:
            break
        best = e
    return best


def _box_in_margin(fam, K):
    K = K or fam.common_box
    g = fam.source
    e = max(fam.epsilons)
    if not (np.all(K.lower >= g.chart.lower + e) and np.all(K.upper <= g.chart.upper - e)):
        raise ChartError("scan box leaves the margin of some member")
    return K


def check_timelike_ec(fam, K: ChartBox | None = None, kappa: float = -0.1, Cbound: float = 10.0,
                      delta: float = 1e-2, directions: int = 32, per_axis: int = 9,
                      lambdas: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 0.9)) -> ConditionReport:
    """Scan ``Ric[narrow_eps](X, X)`` over X with ``g(X,X) <= kappa`` and ``|X| <= Cbound``."""
    if kappa >= 0 or delta <= 0:
        raise ParameterError("need kappa < 0 and delta > 0")
    K = _box_in_margin(fam, K)
    g = fam.source
    n = g.dim
    x = lattice_points(g, K, per_axis)
    E = orthonormal_frame(g.metric(x), g.time_axis)
    dirs = fibonacci_directions(n - 1, directions)
    lam = np.asarray(lambdas)
    # Y = E_0 + lam * sum_a d_a E_a, then X = s Y with s^2 in [-kappa/(1-lam^2), (Cbound/|Y|)^2]
    Y = E[:, None, None, 0, :] + lam[None, None, :, None] * np.einsum("da,pai->pdi", dirs, E[:, 1:, :])[:, :, None, :]
    s2_lo = -kappa / (1 - lam ** 2)
    s2_hi = Cbound ** 2 / np.sum(Y * Y, axis=-1)
    feasible = s2_hi >= s2_lo[None, None, :]
    mins, wits = [], []
    for e in fam.epsilons:
        ric = ricci_smooth(fam.narrow(e), x)
        ry = np.einsum("pij,pdli,pdlj->pdl", ric, Y, Y)
        s2 = np.where(ry < 0, s2_hi, s2_lo[None, None, :])
        val = np.where(feasible, ry * s2, np.inf)
        idx = np.unravel_index(np.argmin(val), val.shape)
        mins.append(float(val[idx]))
        wits.append({"point": x[idx[0]].tolist(), "direction": (np.sqrt(s2[idx]) * Y[idx]).tolist()})
    ok = [m > -delta for m in mins]
    thr = _threshold(fam.epsilons, ok)
    worst = int(np.argmin(mins))
    return ConditionReport("timelike-energy", list(fam.epsilons), mins, wits[worst], thr is not None, thr,
                           {"kappa": kappa, "Cbound": Cbound, "delta": delta})


def check_null_ec(fam, K: ChartBox | None = None, c1: float = 0.5, c2: float = 2.0, delta: float = 1e-2,
                  directions: int = 32, per_axis: int = 9) -> ConditionReport:
    """Scan ``Ric[narrow_eps](X, X)`` over narrow-null X with ``c1 <= |X| <= c2``."""
    if not 0 < c1 < c2 or delta <= 0:
        raise ParameterError("need 0 < c1 < c2 and delta > 0")
    K = _box_in_margin(fam, K)
    g = fam.source
    n = g.dim
    x = lattice_points(g, K, per_axis)
    dirs = fibonacci_directions(n - 1, directions)
    mins, wits = [], []
    for e in fam.epsilons:
        member = fam.narrow(e)
        gm = member.metric(x)
        E = orthonormal_frame(gm, g.time_axis)
        Y = E[:, None, 0, :] + np.einsum("da,pai->pdi", dirs, E[:, 1:, :])
        Y = Y / np.linalg.norm(Y, axis=-1)[..., None]
        ric = ricci_smooth(member, x)
        ry = np.einsum("pij,pdi,pdj->pd", ric, Y, Y)
        scale = np.where(ry < 0, c2, c1) ** 2
        val = ry * scale
        idx = np.unravel_index(np.argmin(val), val.shape)
        mins.append(float(val[idx]))
        wits.append({"point": x[idx[0]].tolist(), "direction": (np.sqrt(scale[idx]) * Y[idx]).tolist()})
    ok = [m > -delta for m in mins]
    thr = _threshold(fam.epsilons, ok)
    worst = int(np.argmin(mins))
    return ConditionReport("null-energy", list(fam.epsilons), mins, wits[worst], thr is not None, thr,
                           {"c1": c1, "c2": c2, "delta": delta})


def bump_perturbation(field_: VectorField, rng: np.random.Generator, size: float, center_box: ChartBox,
                      length: float) -> VectorField:
    """``X + size * b * exp(-|x - c|^2 / length^2)`` with random unit ``b`` and centre ``c``."""
    n = center_box.dim
    b = rng.normal(size=n)
    b /= np.linalg.norm(b)
    c = center_box.sample(rng, 1)[0]

    def value(x):
        r2 = np.sum((x - c) ** 2, axis=-1) / length ** 2
        return field_(x) + size * np.exp(-r2)[..., None] * b

    def jac(x):
        r2 = np.sum((x - c) ** 2, axis=-1) / length ** 2
        bump = np.exp(-r2)
        grad = -2 * (x - c) / length ** 2 * bump[..., None]
        base = field_.jacobian(x) if field_.derivative is not None else 0.0
        return base + size * np.einsum("...j,i->...ji", grad, b)

    return VectorField(value, jac, field_.regularity)  # varies along every axis


def check_genericity(fam, curve, X: VectorField, V: VectorField, delta_perturb: float = 0.01, c: float = 0.5,
                     nperturb: int = 32, seed: int = 0, samples: int = 21, tube: float = 0.02,
                     orth_tol: float = 1e-6) -> ConditionReport:
    """Sampled certificate for ``g_eps(R_eps(X~, V~) V~, X~) > c/2`` near a curve segment.

    ``curve`` is a :class:`~c1spacetime.geodesics.GeodesicSolution`; points are
    its samples plus a tube lattice of radius ``tube`` along each axis.
    """
    if delta_perturb <= 0:
        raise ParameterError("delta_perturb must be positive")
    g = fam.source
    ts = np.linspace(curve.t_span[0], curve.t_span[1], samples)
    pos, vel = curve.position(ts), curve.velocity(ts)
    Vc = V(pos)
    dots = np.abs(g.inner(pos, Vc, vel))
    if np.any(dots > orth_tol * np.linalg.norm(Vc, axis=-1) * np.linalg.norm(vel, axis=-1)):
        raise ParameterError("V is not orthogonal to the curve tangent")
    n = g.dim
    offsets = np.concatenate([np.zeros((1, n)), tube * np.eye(n), -tube * np.eye(n)])
    pts = (pos[:, None, :] + offsets[None, :, :]).reshape(-1, n)
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    cbox = ChartBox(lo - tube - 1e-9, hi + tube + 1e-9)
    rng = np.random.default_rng(seed)
    pert = [(bump_perturbation(X, rng, delta_perturb, cbox, 0.5), bump_perturbation(V, rng, delta_perturb, cbox, 0.5))
            for _ in range(nperturb)]
    mins, wits = [], []
    for e in fam.epsilons:
        member = fam.mid(e)
        pts_e = pts[member.chart.contains(pts)]
        cur = curvature_at(member, pts_e)
        best, wit = np.inf, None
        for Xp, Vp in pert:
            xv, vv = Xp(pts_e), Vp(pts_e)
            val = sectional_form(cur.riemann, cur.metric, xv, vv)
            j = int(np.argmin(val))
            if val[j] < best:
                best, wit = float(val[j]), {"point": pts_e[j].tolist(), "direction": xv[j].tolist(),
                                            "transverse": vv[j].tolist()}
        mins.append(best)
        wits.append(wit)
    ok = [m > c / 2 for m in mins]
    thr = _threshold(fam.epsilons, ok)
    worst = int(np.argmin(mins))
    return ConditionReport("genericity", list(fam.epsilons), mins, wits[worst], thr is not None, thr,
                           {"c": c, "delta_perturb": delta_perturb, "nperturb": nperturb})


def tidal_force_matrix(metric: Metric, curve, frame, t: float) -> np.ndarray:
    """``R_ij = g(R(E_i, gamma') gamma', E_j)`` over the screen legs of ``frame`` at ``t``."""
    x = curve.position(t)
    v = curve.velocity(t)
    legs = frame.legs(t)
    c = curvature_at(metric, x)
    gram = np.einsum("ij,ai,bj->ab", c.metric, legs, legs)
    if np.max(np.abs(gram - np.eye(len(legs)))) > 1e-8:
        raise ParameterError("frame legs are not orthonormal")
    low = np.einsum("mp,mijk->pijk", c.metric, c.riemann)
    # R(E_a, v) v = R^m_ijk v^i E_a^j v^k
    return np.einsum("pijk,i,aj,k,bp->ab", low, v, legs, v, legs)


def tidal_lower_bound_check(matrices, c_tilde: float, C: float) -> bool:
    """True iff every ``M - diag(c_tilde, -C, ..., -C)`` is positive definite."""
    for M in matrices:
        M = np.asarray(M, dtype=float)
        d = M.shape[0]
        bound = np.diag([c_tilde] + [-C] * (d - 1))
        if np.linalg.eigvalsh(M - bound)[0] <= 0:
            return False
    return True
