"""Mollification of metric fields and cone-adjusted smooth families.

The convolution ``G = g * rho_eps`` is evaluated by quadrature over the unit
ball.  Because a metric only varies along its ``depends_on`` axes, the
integral reduces exactly to the marginal of the radial kernel on those axes,
and the marginal itself is a short one-dimensional integral.

First derivatives are ``(dg) * rho_eps``.  Second derivatives move one
derivative onto the kernel, ``d_l d_m G = (1/eps) int d_m g(x - eps u) (d_l rho)(u) du``,
because ``dg`` is only continuous.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .geometry import SMOOTH, ChartBox, ChartError, GeometryError, Metric, ParameterError, SingularMetricError
from .quadrature import gauss_legendre, graded_edges, panel_rule

DEFAULT_EPSILONS = tuple(2.0 ** -k for k in range(3, 9))


class QuadratureError(GeometryError):
    """Node doubling changed a convolution by more than the tolerance."""


class CalibrationError(GeometryError):
    """No cone-shift amplitude up to the cap achieved sampled nesting."""


def _sphere_area(m: int) -> float:
    """Area of the unit sphere S^{m-1} in R^m."""
    return 2.0 * math.pi ** (m / 2) / math.gamma(m / 2)


@dataclass(frozen=True)
class Mollifier:
    """Radial bump ``rho(u) ~ exp(-sharpness / (1 - |u|^2))`` on the unit ball of R^n.

    ``panels``/``nodes`` set the composite Gauss rule per axis; ``levels``
    and ``ratio`` the geometric refinement toward kinks of the integrand.
    """

    n: int
    sharpness: float = 1.0
    panels: int = 8
    nodes: int = 16
    levels: int = 8
    ratio: float = 0.15
    inner_nodes: int = 64
    norm: float = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.n <= 4:
            raise ParameterError("mollifier dimension must be 1..4")
        if self.sharpness <= 0:
            raise ParameterError("sharpness must be positive")
        gam, n = self.sharpness, self.n

        def radial(r):
            return math.exp(-gam / (1 - r * r)) * r ** (n - 1) if r < 1 else 0.0

        mass, _ = integrate.quad(radial, 0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)
        object.__setattr__(self, "norm", _sphere_area(n) * mass)

    def profile(self, r2: np.ndarray) -> np.ndarray:
        r2 = np.asarray(r2, dtype=float)
        out = np.zeros_like(r2)
        inside = r2 < 1
        out[inside] = np.exp(-self.sharpness / (1 - r2[inside]))
        return out

    def density(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.profile(np.sum(u * u, axis=-1)) / self.norm

    def marginal(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Marginal density on ``k = u.shape[-1]`` axes and its gradient."""
        u = np.asarray(u, dtype=float)
        k = u.shape[-1]
        m = self.n - k
        s2 = np.sum(u * u, axis=-1)
        gam = self.sharpness
        if m == 0:
            val = self.profile(s2) / self.norm
            inside = s2 < 1
            fac = np.zeros_like(s2)
            fac[inside] = -2 * gam / (1 - s2[inside]) ** 2
            return val, (val * fac)[..., None] * u
        z, w = gauss_legendre(self.inner_nodes)
        z = 0.5 * (z + 1)
        w = 0.5 * w
        R2 = np.clip(1 - s2, 0.0, None)[..., None]
        denom = R2 * (1 - z * z)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            e = np.where(denom > 0, np.exp(-gam / np.where(denom > 0, denom, 1.0)), 0.0)
            d = np.where(denom > 0, -2 * gam / np.where(denom > 0, denom, 1.0) ** 2, 0.0)
        zw = w * z ** (m - 1)
        scale = _sphere_area(m) * R2[..., 0] ** (m / 2) / self.norm
        val = scale * np.sum(e * zw, axis=-1)
        grad_fac = scale * np.sum(e * d * zw, axis=-1)
        return val, grad_fac[..., None] * u

    def axis_rule(self, splits: np.ndarray | None, count: int, refine: int = 1):
        """Per-point 1-D nodes and weights on [-1, 1]; ``splits`` has shape (count, S)."""
        m = self.nodes * refine
        if splits is None or splits.shape[-1] == 0 or not np.any(np.abs(splits) < 1):
            edges = np.broadcast_to(np.linspace(-1.0, 1.0, self.panels + 1), (count, self.panels + 1))
            return panel_rule(np.ascontiguousarray(edges), m)
        edges = graded_edges(splits, panels=self.panels, levels=self.levels, ratio=self.ratio)
        return panel_rule(edges, m)


def _axis_splits(g: Metric, axis: int, coords: np.ndarray, eps: float) -> np.ndarray | None:
    bps = g.breakpoints.get(axis, ())
    if not bps:
        return None
    return (coords[:, None] - np.asarray(bps, dtype=float)[None, :]) / eps


def _kernel_rule(g: Metric, moll: Mollifier, eps: float, xs: np.ndarray, refine: int):
    """Nodes ``u`` (M|1, Q, k), weights, kernel values and kernel gradients."""
    D = list(g.depends_on)
    splits = [_axis_splits(g, a, xs[:, a], eps) for a in D]
    smooth = all(s is None or not np.any(np.abs(s) < 1) for s in splits)
    if smooth:
        key = (len(D), refine)
        if key not in moll._cache:
            moll._cache[key] = _product_rule(moll, [None] * len(D), 1, refine)
        return moll._cache[key]
    return _product_rule(moll, splits, xs.shape[0], refine)


def _product_rule(moll: Mollifier, splits, count: int, refine: int):
    rules = [moll.axis_rule(s, count, refine) for s in splits]
    grids = np.meshgrid(*[np.arange(r[0].shape[1]) for r in rules], indexing="ij")
    idx = [gi.ravel() for gi in grids]
    u = np.stack([r[0][:, i] for r, i in zip(rules, idx)], axis=-1)
    w = np.prod(np.stack([r[1][:, i] for r, i in zip(rules, idx)], axis=-1), axis=-1)
    rho, grad = moll.marginal(u)
    return u, w, rho, grad


def _near_kink(g: Metric, eps: float, xs: np.ndarray) -> np.ndarray:
    near = np.zeros(xs.shape[0], dtype=bool)
    for a in g.depends_on:
        s = _axis_splits(g, a, xs[:, a], eps)
        if s is not None:
            near |= np.any(np.abs(s) < 1, axis=1)
    return near


def _convolve_unique(g: Metric, moll: Mollifier, eps: float, xs: np.ndarray, order: int, refine: int):
    """Convolution at rows ``xs`` of shape (M, n); every row is a distinct point."""
    near = _near_kink(g, eps, xs)
    if near.any() and not near.all():
        parts = [_convolve_unique(g, moll, eps, xs[mask], order, refine) for mask in (near, ~near)]
        out = []
        for a, b in zip(*parts):
            r = np.empty((xs.shape[0],) + a.shape[1:])
            r[near], r[~near] = a, b
            out.append(r)
        return out
    M, n = xs.shape
    D = list(g.depends_on)
    u, w, rho, grad = _kernel_rule(g, moll, eps, xs, refine)
    y = np.repeat(xs[:, None, :], u.shape[1], axis=1)
    y[..., D] -= eps * u
    wr = w * rho
    mass = np.sum(wr, axis=1)
    gv, dgv = g.jet(y, 1)
    wr = np.broadcast_to(wr, (M, wr.shape[1]))
    mass = np.broadcast_to(mass, (M,))
    G = np.einsum("mq,mqij->mij", wr, gv) / mass[:, None, None]
    out = [G]
    if order >= 1:
        out.append(np.einsum("mq,mqkij->mkij", wr, dgv) / mass[:, None, None, None])
    if order >= 2:
        ddG = np.zeros((M, n, n, n, n))
        # discrete derivative kernel: zero total mass and unit first moment,
        # so affine first derivatives are differentiated exactly
        wg = w[..., None] * grad
        wg = wg - np.sum(wg, axis=1)[:, None, :] * (wr[: wg.shape[0]] / mass[: wg.shape[0], None])[..., None]
        moment = -np.einsum("mql,mql->ml", wg, u)
        wg = np.broadcast_to(wg / moment[:, None, :], (M,) + wg.shape[1:])
        ddG[:, D] = np.einsum("mql,mqkij->mlkij", wg, dgv) / eps
        ddG = 0.5 * (ddG + np.swapaxes(ddG, 1, 2))
        out.append(ddG)
    return out


def convolve(g: Metric, moll: Mollifier, eps: float, x, order: int = 2, check: bool = False,
             tol: float = 1e-8):
    """Evaluate ``g * rho_eps`` and its first ``order`` derivatives at ``x``.

    With ``check`` the node count is doubled and a :class:`QuadratureError`
    raised when the two results differ by more than ``tol`` (relative to the
    size of each output).
    """
    if eps <= 0:
        raise ParameterError("epsilon must be positive")
    if moll.n != g.dim:
        raise ParameterError("mollifier dimension differs from metric dimension")
    x = np.asarray(x, dtype=float)
    g.chart.check(x, margin=eps)
    flat = x.reshape(-1, g.dim)
    n = g.dim
    if not g.depends_on:
        res = list(g.jet(flat, 1))[: order + 1]
        if order >= 2:
            res.append(np.zeros(flat.shape[:-1] + (n,) * 4))
        return tuple(r.reshape(x.shape[:-1] + r.shape[1:]) for r in res)
    D = list(g.depends_on)
    _, first, inverse = np.unique(flat[:, D], axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    reps = flat[first]
    res = _convolve_unique(g, moll, eps, reps, order, 1)
    if check:
        fine = _convolve_unique(g, moll, eps, reps, order, 2)
        for a, b in zip(res, fine):
            scale = max(1.0, float(np.max(np.abs(b))))
            err = float(np.max(np.abs(a - b))) / scale
            if err > tol:
                raise QuadratureError(f"node doubling changed result by {err:.3e} (tol {tol:.1e})")
    return tuple(r[inverse].reshape(x.shape[:-1] + r.shape[1:]) for r in res)


def quadrature_error(g: Metric, moll: Mollifier, eps: float, x, order: int = 2) -> float:
    """Largest relative change of the convolution outputs under node doubling."""
    x = np.asarray(x, dtype=float).reshape(-1, g.dim)
    if not g.depends_on:
        return 0.0
    D = list(g.depends_on)
    _, first = np.unique(x[:, D], axis=0, return_index=True)
    reps = x[first]
    a = _convolve_unique(g, moll, eps, reps, order, 1)
    b = _convolve_unique(g, moll, eps, reps, order, 2)
    return max(float(np.max(np.abs(p - q))) / max(1.0, float(np.max(np.abs(q)))) for p, q in zip(a, b))


def _coframe_projector(G, dG, ddG, t: int, order: int):
    """``sigma (x) sigma`` for ``sigma = -G(e_t, .) / sqrt(-G(e_t, e_t))`` and its derivatives."""
    s = -G[..., t, :]
    q = -G[..., t, t]
    P = np.einsum("...i,...j->...ij", s, s) / q[..., None, None]
    out = [P]
    if order >= 1:
        ds = -dG[..., :, t, :]
        dq = -dG[..., :, t, t]
        qq = q[..., None, None, None]
        dP = (np.einsum("...ki,...j->...kij", ds, s) + np.einsum("...i,...kj->...kij", s, ds)) / qq \
            - P[..., None, :, :] * (dq / q[..., None])[..., None, None]
        out.append(dP)
    if order >= 2:
        dds = -ddG[..., :, :, t, :]
        ddq = -ddG[..., :, :, t, t]
        q4 = q[..., None, None, None, None]
        num = (np.einsum("...lki,...j->...lkij", dds, s) + np.einsum("...ki,...lj->...lkij", ds, ds)
               + np.einsum("...li,...kj->...lkij", ds, ds) + np.einsum("...i,...lkj->...lkij", s, dds))
        A = np.einsum("...ki,...j->...kij", ds, s) + np.einsum("...i,...kj->...kij", s, ds)
        ddP = num / q4 \
            - np.einsum("...kij,...l->...lkij", A, dq) / q4 ** 2 \
            - np.einsum("...lij,...k->...lkij", A, dq) / q4 ** 2 \
            - np.einsum("...ij,...lk->...lkij", np.einsum("...i,...j->...ij", s, s), ddq) / q4 ** 2 \
            + 2 * np.einsum("...ij,...l,...k->...lkij", np.einsum("...i,...j->...ij", s, s), dq, dq) / q4 ** 3
        out.append(ddP)
    return out


@dataclass(frozen=True, eq=False)
class SmoothMember(Metric):
    """``g * rho_eps + shift * sigma (x) sigma``; shift > 0 narrows the cones."""

    source: Metric
    mollifier: Mollifier
    epsilon: float
    shift: float = 0.0
    label: str = "mid"

    @property
    def name(self) -> str:
        return f"{self.source.name}*rho[{self.epsilon:g},{self.label}]"

    @property
    def chart(self) -> ChartBox:
        return self.source.chart.shrink(self.epsilon)

    @property
    def regularity(self):
        return SMOOTH

    @property
    def depends_on(self):
        return self.source.depends_on

    @property
    def breakpoints(self):
        return {}

    @property
    def time_axis(self) -> int:
        return self.source.time_axis

    @property
    def max_order(self) -> int:
        return 2

    def jet(self, x, order: int = 1):
        res = list(convolve(self.source, self.mollifier, self.epsilon, x, order=max(order, 0)))
        if self.shift != 0.0:
            full = res + [None] * (3 - len(res))
            P = _coframe_projector(full[0], full[1] if order >= 1 else None, full[2] if order >= 2 else None,
                                   self.time_axis, order)
            res = [r + self.shift * p for r, p in zip(res, P)]
        return tuple(res[: order + 1])


@dataclass(frozen=True, eq=False)
class MollifiedFamily:
    source: Metric
    mollifier: Mollifier
    epsilons: tuple[float, ...]
    A: float
    calibration: dict = field(default_factory=dict)

    def mid(self, eps: float) -> SmoothMember:
        return SmoothMember(self.source, self.mollifier, eps, 0.0, "mid")

    def narrow(self, eps: float) -> SmoothMember:
        return SmoothMember(self.source, self.mollifier, eps, self.A * eps, "narrow")

    def wide(self, eps: float) -> SmoothMember:
        return SmoothMember(self.source, self.mollifier, eps, -self.A * eps, "wide")

    def shift(self, eps: float) -> float:
        return self.A * eps

    @property
    def common_box(self) -> ChartBox:
        return self.source.chart.shrink(max(self.epsilons))


def _check_grid(g: Metric, eps_grid) -> tuple[float, ...]:
    eps = tuple(sorted((float(e) for e in eps_grid), reverse=True))
    if not eps or eps[-1] <= 0:
        raise ParameterError("epsilon grid must contain positive values")
    if 2 * eps[0] >= float(np.min(g.chart.widths)):
        raise ChartError("largest epsilon leaves no interior margin box")
    return eps


def sample_points(box: ChartBox, g: Metric, rng: np.random.Generator, count: int,
                  eps: float, near_fraction: float = 0.25) -> np.ndarray:
    """Uniform points in ``box``, with a fraction placed within 1.5 eps of a breakpoint."""
    pts = box.sample(rng, count)
    axes = [a for a, b in g.breakpoints.items() if b]
    if not axes or near_fraction <= 0:
        return pts
    n_near = int(count * near_fraction)
    for j in range(n_near):
        a = axes[j % len(axes)]
        bps = g.breakpoints[a]
        b = bps[rng.integers(len(bps))]
        pts[j, a] = np.clip(b + 1.5 * eps * (2 * rng.random() - 1), box.lower[a], box.upper[a])
    return pts


def random_causal(metric: Metric, x: np.ndarray, rng: np.random.Generator, null_fraction: float = 0.5,
                  gm: np.ndarray | None = None):
    """Random causal vectors of ``metric`` at points ``x``, mixing null and timelike.

    ``gm`` may carry precomputed metric components at ``x``.
    """
    if gm is None:
        gm = metric.metric(x)
    gtt = gm[..., metric.time_axis, metric.time_axis]
    if np.any(gtt >= 0):
        raise SingularMetricError("time axis is not timelike")
    T = np.zeros(x.shape)
    T[..., metric.time_axis] = 1.0 / np.sqrt(-gtt)
    r = rng.normal(size=x.shape)
    gT = np.einsum("...ij,...j->...i", gm, T)
    u = r + np.einsum("...i,...i->...", r, gT)[..., None] * T
    norm = np.sqrt(np.maximum(np.einsum("...ij,...i,...j->...", gm, u, u), 1e-300))
    u = u / norm[..., None]
    lam = np.where(rng.random(x.shape[:-1]) < null_fraction, 1.0, rng.random(x.shape[:-1]))
    sign = np.where(rng.random(x.shape[:-1]) < 0.5, -1.0, 1.0)
    scale = np.exp(rng.normal(size=x.shape[:-1]))
    return (sign * scale)[..., None] * (T + lam[..., None] * u)


@dataclass
class NestingReport:
    passed: bool
    worst_margin: float
    per_epsilon: list[dict]


def verify_nesting(fam: MollifiedFamily, samples: int = 1000, seed: int = 0,
                   epsilons: Sequence[float] | None = None) -> NestingReport:
    """Sample narrow-causal vectors (must be g-timelike) and g-causal vectors (must be wide-timelike).

    The margin of a vector is ``-h(v, v) / |v|^2`` for the metric ``h`` that
    must see it as timelike; it has to be strictly positive.
    """
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    g = fam.source
    rows = []
    worst = np.inf
    for eps in (fam.epsilons if epsilons is None else epsilons):
        box = g.chart.shrink(eps)
        x = sample_points(box, g, rng, samples, eps)
        # narrow and wide differ from the mid member only by +-A eps sigma (x) sigma
        G = fam.mid(eps).metric(x)
        P = _coframe_projector(G, None, None, g.time_axis, 0)[0]
        shift = fam.shift(eps)
        gm = g.metric(x)
        v = random_causal(fam.narrow(eps), x, rng, gm=G + shift * P)
        e2 = np.sum(v * v, axis=-1)
        m_narrow = -np.einsum("...ij,...i,...j->...", gm, v, v) / e2
        w = random_causal(g, x, rng, gm=gm)
        wm = G - shift * P
        m_wide = -np.einsum("...ij,...i,...j->...", wm, w, w) / np.sum(w * w, axis=-1)
        row = {"epsilon": eps, "narrow_pass_fraction": float(np.mean(m_narrow > 0)),
               "wide_pass_fraction": float(np.mean(m_wide > 0)),
               "worst_narrow": float(np.min(m_narrow)), "worst_wide": float(np.min(m_wide))}
        rows.append(row)
        worst = min(worst, row["worst_narrow"], row["worst_wide"])
    return NestingReport(bool(worst > 0), float(worst), rows)


def sup_metric_error(g: Metric, member: SmoothMember, x: np.ndarray) -> tuple[float, float]:
    G, dG = member.jet(x, 1)
    g0, dg0 = g.jet(x, 1)
    return float(np.max(np.abs(G - g0))), float(np.max(np.abs(dG - dg0)))


def build_family(g: Metric, mollifier: Mollifier | None = None, epsilons=DEFAULT_EPSILONS,
                 A: float | None = None, samples: int = 1000, seed: int = 0,
                 safety: float = 2.0) -> MollifiedFamily:
    """Mollified family with cone shift ``A * eps``; ``A=None`` calibrates it.

    Calibration starts from twice the largest observed ``sup|g*rho_eps - g| / eps``,
    doubles until sampled nesting holds on four times ``samples`` points, and
    multiplies the result by ``safety``.  The cap is
    ``1e3 * max(1, sup|g*rho_eps - g| / eps)``.
    """
    moll = mollifier or Mollifier(g.dim)
    eps = _check_grid(g, epsilons)
    if A is not None:
        if A < 0:
            raise ParameterError("cone shift amplitude must be nonnegative")
        return MollifiedFamily(g, moll, eps, float(A))
    rng = np.random.default_rng(seed + 7919)
    ratio = 0.0
    for e in eps:
        x = sample_points(g.chart.shrink(e), g, rng, 256, e, near_fraction=0.5)
        ratio = max(ratio, sup_metric_error(g, SmoothMember(g, moll, e), x)[0] / e)
    A_max = 1e3 * max(1.0, ratio)
    trial = max(2 * ratio, 1e-3)
    attempts = []
    while trial <= A_max:
        fam = MollifiedFamily(g, moll, eps, trial)
        rep = verify_nesting(fam, 4 * samples, seed + 104729)
        attempts.append((trial, rep.worst_margin))
        if rep.passed:
            info = {"error_ratio": ratio, "A_passed": trial, "A_max": A_max, "safety": safety,
                    "attempts": attempts}
            return MollifiedFamily(g, moll, eps, safety * trial, info)
        trial *= 2
    raise CalibrationError(f"no cone shift up to A_max={A_max:.3g} nests the cones")


def loglog_slope(eps, values) -> float:
    e = np.log(np.asarray(eps, dtype=float))
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        return float("nan")
    return float(np.polyfit(e, np.log(v), 1)[0])


@dataclass
class DiagnosticsTable:
    rows: list[dict]
    slopes: dict

    columns = ("epsilon", "sup_g_err", "sup_dg_err", "cone_shift", "slope_fit")

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)


def diagnostic_points(g: Metric, box: ChartBox, budget: int = 4000) -> np.ndarray:
    """Grid over the varying axes of ``g`` (others at the box centre), breakpoints included."""
    center = 0.5 * (box.lower + box.upper)
    D = list(g.depends_on)
    if not D:
        return center[None, :]
    per = max(3, int(round(budget ** (1.0 / len(D)))))
    axes = []
    for a in D:
        vals = np.linspace(box.lower[a], box.upper[a], per)
        bps = [b for b in g.breakpoints.get(a, ()) if box.lower[a] <= b <= box.upper[a]]
        axes.append(np.unique(np.concatenate([vals, bps])))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.repeat(center[None, :], mesh[0].size, axis=0)
    for j, a in enumerate(D):
        pts[:, a] = mesh[j].ravel()
    return pts


def convergence_diagnostics(fam: MollifiedFamily, K: ChartBox | None = None, budget: int = 4000) -> DiagnosticsTable:
    g = fam.source
    K = K or fam.common_box
    for e in fam.epsilons:
        if not (np.all(K.lower >= g.chart.lower + e) and np.all(K.upper <= g.chart.upper - e)):
            raise ChartError("diagnostic box leaves the margin of some member")
    x = diagnostic_points(g, K, budget)
    g0, dg0 = g.jet(x, 1)
    rows = []
    for e in fam.epsilons:
        G, dG = fam.mid(e).jet(x, 1)
        shift = float(np.max(np.abs(fam.narrow(e).metric(x) - G)))
        rows.append({"epsilon": e, "sup_g_err": float(np.max(np.abs(G - g0))),
                     "sup_dg_err": float(np.max(np.abs(dG - dg0))), "cone_shift": shift})
    for i, r in enumerate(rows):
        if i == 0:
            r["slope_fit"] = float("nan")
        else:
            r["slope_fit"] = loglog_slope([rows[i - 1]["epsilon"], r["epsilon"]],
                                          [rows[i - 1]["sup_g_err"], r["sup_g_err"]])
    eps = [r["epsilon"] for r in rows]
    slopes = {c: loglog_slope(eps, [r[c] for r in rows]) for c in ("sup_g_err", "sup_dg_err", "cone_shift")}
    return DiagnosticsTable(rows, slopes)
