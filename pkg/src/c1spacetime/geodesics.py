"""Geodesic integration, parallel transport, screen frames and cylindrical extension."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .curvature import christoffel, orthonormal_frame
from .geometry import (Causal, ChartBox, GeometryError, Metric, ParameterError, TangentVector, VectorField,
                       causal_character, inverse_metric)

SMOOTH_TOL = (1e-9, 1e-11)
ROUGH_TOL = (1e-6, 1e-8)
TRANSPORT_TOL = (1e-11, 1e-13)


class IntegrationError(GeometryError):
    """The integrator failed, typically through step-size underflow."""

    def __init__(self, message: str, t: float | None = None, state: np.ndarray | None = None):
        super().__init__(message if t is None else f"{message} (at t={t:.6g})")
        self.t = t
        self.state = state


def default_tolerances(metric: Metric) -> tuple[float, float]:
    return SMOOTH_TOL if metric.regularity.is_smooth else ROUGH_TOL


def _exit_events(chart: ChartBox, n: int):
    """One terminal event per chart face, positive while inside."""
    events = []
    for a in range(n):
        for side in (0, 1):
            def ev(t, y, a=a, side=side):
                return y[a] - chart.lower[a] if side == 0 else chart.upper[a] - y[a]
            ev.terminal = True
            ev.direction = -1
            events.append(ev)
    return events


def _solve(rhs, span, y0, rtol, atol, method, events=None, max_step=np.inf):
    sol = solve_ivp(rhs, span, y0, method=method, rtol=rtol, atol=atol, dense_output=True,
                    events=events, max_step=max_step)
    if sol.status == -1:
        raise IntegrationError(f"integration failed: {sol.message}", float(sol.t[-1]), sol.y[:, -1])
    return sol


@dataclass
class GeodesicSolution:
    metric: Metric
    t_span: tuple[float, float]
    requested: tuple[float, float]
    interpolant: Callable
    character: Causal
    stats: dict
    tolerance: tuple[float, float]
    truncated: bool = False
    exit_reason: str = ""

    @property
    def dim(self) -> int:
        return self.metric.dim

    def state(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.moveaxis(self.interpolant(t), 0, -1)

    def position(self, t) -> np.ndarray:
        return self.state(t)[..., : self.dim]

    def velocity(self, t) -> np.ndarray:
        return self.state(t)[..., self.dim:]

    def norm(self, t) -> np.ndarray:
        """``g(v, v)`` along the curve."""
        x, v = self.position(t), self.velocity(t)
        return self.metric.inner(x, v, v)

    def samples(self, count: int = 201) -> np.ndarray:
        return np.linspace(self.t_span[0], self.t_span[1], count)

    def equation_residual(self, t, h: float = 1e-5) -> np.ndarray:
        """``|x'' + Gamma(x', x')|`` with ``x''`` from central differences of the dense output."""
        t = np.asarray(t, dtype=float)
        a, b = min(self.t_span), max(self.t_span)
        t = np.clip(t, a + h, b - h)
        acc = (self.velocity(t + h) - self.velocity(t - h)) / (2 * h)
        x, v = self.position(t), self.velocity(t)
        gm, dg = self.metric.jet(x, 1)
        force = np.einsum("...kij,...i,...j->...k", christoffel(gm, dg), v, v)
        return np.linalg.norm(acc + force, axis=-1)

    def write_csv(self, path, count: int = 201) -> None:
        ts = self.samples(count)
        st = self.state(ts)
        nrm = self.norm(ts)
        n = self.dim
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i}" for i in range(n)] + [f"v{i}" for i in range(n)] + ["g(v,v)"])
            for t, s, q in zip(ts, st, nrm):
                w.writerow([repr(float(t))] + [repr(float(c)) for c in s] + [repr(float(q))])


def geodesic_rhs(metric: Metric) -> Callable:
    n = metric.dim
    lo, hi = metric.chart.lower, metric.chart.upper

    def rhs(t, y):
        x = np.clip(y[:n], lo, hi)
        v = y[n:]
        gm, dg = metric.jet(x, 1)
        acc = -np.einsum("kij,i,j->k", christoffel(gm, dg), v, v)
        return np.concatenate([v, acc])

    return rhs


def integrate_geodesic(metric: Metric, p, v, span: Sequence[float], rtol: float | None = None,
                       atol: float | None = None, method: str = "DOP853", max_step: float = np.inf) -> GeodesicSolution:
    """Integrate ``x' = v, v' = -Gamma(x)(v, v)`` from ``(p, v)`` at ``span[0]``.

    Integration stops at the chart boundary; the solution is then flagged
    ``truncated`` and its ``t_span`` ends at the exit parameter.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    metric.chart.check(p)
    if not np.any(metric.chart.contains(p[None, :], 1e-12)):
        raise ParameterError("initial point must be interior")
    if not np.any(v):
        raise ParameterError("initial velocity must be nonzero")
    dr, da = default_tolerances(metric)
    rtol = dr if rtol is None else rtol
    atol = da if atol is None else atol
    n = metric.dim
    counter = {"nfev": 0}
    base = geodesic_rhs(metric)

    def rhs(t, y):
        counter["nfev"] += 1
        return base(t, y)

    a, b = float(span[0]), float(span[1])
    sol = _solve(rhs, (a, b), np.concatenate([p, v]), rtol, atol, method, _exit_events(metric.chart, n), max_step)
    end = float(sol.t[-1])
    truncated = sol.status == 1
    stages = {"DOP853": 12, "RK45": 6, "RK23": 3}.get(method, 6)
    steps = len(sol.t) - 1
    stats = {"steps": steps, "nfev": counter["nfev"],
             "rejected_estimate": max(0, (counter["nfev"] - 2 - stages * steps) // stages), "method": method}
    kind, _ = causal_character(metric, TangentVector(p, v))
    return GeodesicSolution(metric, (a, end), (a, b), sol.sol, kind, stats, (rtol, atol), truncated,
                            "chart boundary" if truncated else "")


@dataclass
class ConvergenceTable:
    rows: list[dict]
    limit: GeodesicSolution

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)


def geodesic_family_convergence(fam, p, v, span, dp=None, dv=None, member: str = "mid",
                                samples: int = 401, rtol=None, atol=None) -> ConvergenceTable:
    """Sup deviations of member geodesics from the limit ``g``-geodesic.

    Member ``eps`` starts from ``(p + eps*dp, v + eps*dv)`` so that the data
    converge to ``(p, v)``.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    dp = np.zeros_like(p) if dp is None else np.asarray(dp, dtype=float)
    dv = np.zeros_like(v) if dv is None else np.asarray(dv, dtype=float)
    tol_r, tol_a = (1e-11, 1e-13) if fam.source.regularity.is_smooth else (1e-10, 1e-12)
    rtol = tol_r if rtol is None else rtol
    atol = tol_a if atol is None else atol
    limit = integrate_geodesic(fam.source, p, v, span, rtol, atol)
    if limit.truncated:
        raise ParameterError("limit geodesic leaves the chart before the end of the span")
    ts = np.linspace(span[0], span[1], samples)
    x0, v0 = limit.position(ts), limit.velocity(ts)
    pick = {"mid": fam.mid, "narrow": fam.narrow, "wide": fam.wide}[member]
    rows = []
    for e in fam.epsilons:
        geo = integrate_geodesic(pick(e), p + e * dp, v + e * dv, span, rtol, atol)
        row = {"epsilon": e, "escaped": geo.truncated}
        if geo.truncated:
            row.update(c0=float("nan"), c1=float("nan"))
        else:
            dx = np.max(np.linalg.norm(geo.position(ts) - x0, axis=-1))
            dvv = np.max(np.linalg.norm(geo.velocity(ts) - v0, axis=-1))
            row.update(c0=float(dx), c1=float(max(dx, dvv)))
        rows.append(row)
    return ConvergenceTable(rows, limit)


class CurveField:
    """Vector fields along a curve given by values and parameter derivatives."""

    def __init__(self, value: Callable, derivative: Callable, t_span: tuple[float, float]):
        self._value = value
        self._derivative = derivative
        self.t_span = t_span

    def __call__(self, t) -> np.ndarray:
        return self._value(np.asarray(t, dtype=float))

    def derivative(self, t) -> np.ndarray:
        return self._derivative(np.asarray(t, dtype=float))


def _transport_rhs(metric: Metric, curve: GeodesicSolution, m: int):
    n = metric.dim

    def rhs(t, y):
        x = np.clip(curve.position(t), metric.chart.lower, metric.chart.upper)
        v = curve.velocity(t)
        gm, dg = metric.jet(x, 1)
        W = y.reshape(m, n)
        return -np.einsum("kij,i,aj->ak", christoffel(gm, dg), v, W).ravel()

    return rhs


def parallel_transport(metric: Metric, curve: GeodesicSolution, w0, t0: float | None = None,
                       rtol: float = TRANSPORT_TOL[0], atol: float = TRANSPORT_TOL[1]) -> CurveField:
    """Transport the rows of ``w0`` (one vector or a stack) along ``curve`` from ``t0``.

    Returns a :class:`CurveField` whose values have the shape of ``w0``.
    """
    w0 = np.asarray(w0, dtype=float)
    single = w0.ndim == 1
    W0 = np.atleast_2d(w0)
    m, n = W0.shape
    a, b = curve.t_span
    t0 = a if t0 is None else float(t0)
    lo, hi = min(a, b), max(a, b)
    if not lo <= t0 <= hi:
        raise ParameterError("t0 outside the curve span")
    rhs = _transport_rhs(metric, curve, m)
    pieces = []
    for end in (lo, hi):
        if end != t0:
            pieces.append((min(t0, end), max(t0, end), _solve(rhs, (t0, end), W0.ravel(), rtol, atol, "DOP853").sol))

    def value(t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t)
        out = np.empty(flat.shape + (m * n,))
        out[:] = W0.ravel()
        for s, e, interp in pieces:
            mask = (flat >= s) & (flat <= e)
            if np.any(mask):
                out[mask] = interp(flat[mask]).T
        out = out.reshape(flat.shape + (m, n))
        if single:
            out = out[..., 0, :]
        return out.reshape(t.shape + out.shape[flat.ndim:])

    def derivative(t):
        t = np.asarray(t, dtype=float)
        W = value(t)
        x = curve.position(t)
        v = curve.velocity(t)
        gm, dg = metric.jet(x, 1)
        gam = christoffel(gm, dg)
        if single:
            return -np.einsum("...kij,...i,...j->...k", gam, v, W)
        return -np.einsum("...kij,...i,...aj->...ak", gam, v, W)

    return CurveField(value, derivative, (lo, hi))


@dataclass
class FrameField:
    """Parallel frame along a causal geodesic.

    ``all_legs(t)`` returns the ``n`` transported legs; the first ``d``
    (``n-1`` timelike, ``n-2`` null) span the screen exposed by ``legs``.
    For timelike curves the last leg is the unit tangent.  For null curves
    the last two legs ``e_{n-1}`` (spacelike) and ``e_n`` (timelike) satisfy
    ``e_{n-1} + e_n = gamma'``.
    """

    metric: Metric
    curve: GeodesicSolution
    transport: CurveField
    d: int
    null: bool
    certificate: dict = field(default_factory=dict)

    def all_legs(self, t) -> np.ndarray:
        return self.transport(t)

    def legs(self, t) -> np.ndarray:
        return self.transport(t)[..., : self.d, :]

    def orthonormality_error(self, t) -> np.ndarray:
        E = self.all_legs(t)
        gm = self.metric.metric(self.curve.position(t))
        n = self.metric.dim
        eta = np.diag([1.0] * (n - 1) + [-1.0])
        gram = np.einsum("...ij,...ai,...bj->...ab", gm, E, E)
        return np.max(np.abs(gram - eta), axis=(-1, -2))


def _gram_schmidt_extend(gm, legs: list[np.ndarray], signs: list[float], n: int, count: int):
    """Append ``count`` unit spacelike legs orthogonal to ``legs`` from coordinate axes."""
    out = []
    for ax in range(n):
        if len(out) == count:
            break
        w = np.zeros(n)
        w[ax] = 1.0
        for e, s in zip(legs + out, signs + [1.0] * len(out)):
            w = w - s * (e @ gm @ w) * e
        q = w @ gm @ w
        if q > 1e-10 * max(1.0, float(np.max(np.abs(gm)))):
            out.append(w / np.sqrt(q))
    if len(out) < count:
        raise ParameterError("could not complete the frame")
    return out


def build_perp_frame(metric: Metric, curve: GeodesicSolution, seed, t0: float | None = None,
                     tol: float = 1e-8) -> FrameField:
    t0 = curve.t_span[0] if t0 is None else float(t0)
    n = metric.dim
    x = curve.position(t0)
    u = curve.velocity(t0)
    gm = metric.metric(x)
    seed = np.asarray(seed, dtype=float)
    q = u @ gm @ u
    scale = float(np.linalg.norm(u))
    if np.linalg.norm(seed) < tol:
        raise ParameterError("degenerate seed vector")
    if abs(seed @ gm @ u) > tol * np.linalg.norm(seed) * scale:
        raise ParameterError("seed is not orthogonal to the tangent")
    if q < -tol * scale ** 2:
        en = u / np.sqrt(-q)
        s1 = seed + (seed @ gm @ en) * en
        nrm = s1 @ gm @ s1
        if nrm <= tol:
            raise ParameterError("degenerate seed vector")
        e1 = s1 / np.sqrt(nrm)
        rest = _gram_schmidt_extend(gm, [en, e1], [-1.0, 1.0], n, n - 2)
        legs = [e1] + rest + [en]
        d, null = n - 1, False
    elif abs(q) <= tol * scale ** 2:
        if n < 3:
            raise ParameterError("null screens need dimension >= 3")
        T = metric.time_vector(x)
        alpha = -(u @ gm @ T)
        if alpha <= 0:
            raise ParameterError("null tangent must be future directed")
        s_hat = u / alpha - T
        ell = (T - s_hat) / alpha
        s1 = seed - ((seed @ gm @ ell) / (u @ gm @ ell)) * u - ((seed @ gm @ u) / (ell @ gm @ u)) * ell
        nrm = s1 @ gm @ s1
        if nrm <= tol * max(1.0, float(seed @ seed)):
            raise ParameterError("seed is proportional to the tangent modulo the null direction")
        e1 = s1 / np.sqrt(nrm)
        e_n = 0.5 * (u + ell)
        e_nm1 = 0.5 * (u - ell)
        rest = _gram_schmidt_extend(gm, [e_n, e_nm1, e1], [-1.0, 1.0, 1.0], n, n - 3)
        legs = [e1] + rest + [e_nm1, e_n]
        d, null = n - 2, True
    else:
        raise ParameterError("frames are built along timelike or null geodesics")
    transport = parallel_transport(metric, curve, np.array(legs), t0)
    frame = FrameField(metric, curve, transport, d, null)
    ts = np.linspace(curve.t_span[0], curve.t_span[1], 100)
    frame.certificate = {"checkpoints": 100, "max_error": float(np.max(frame.orthonormality_error(ts)))}
    return frame


def householder_to_first_axis(u: np.ndarray) -> np.ndarray:
    """Orthogonal symmetric matrix ``L`` with ``L u = |u| e_1``."""
    u = np.asarray(u, dtype=float)
    e1 = np.zeros_like(u)
    e1[0] = 1.0
    a = u / np.linalg.norm(u)
    w = a - e1
    if np.linalg.norm(w) < 1e-14:
        return np.eye(u.size)
    w = w / np.linalg.norm(w)
    return np.eye(u.size) - 2 * np.outer(w, w)


@dataclass
class CylindricalExtension:
    field: VectorField
    L: np.ndarray
    window: tuple[float, float]
    curve: GeodesicSolution

    def parameter_of(self, x) -> np.ndarray:
        return self._tau(np.asarray(x, dtype=float) @ self.L.T)

    def adapted_jacobian(self, y) -> np.ndarray:
        """Jacobian with respect to adapted coordinates ``y = L x``; only the first row is nonzero."""
        x = np.asarray(y, dtype=float) @ self.L
        return np.einsum("...ji,kj->...ki", self.field.jacobian(x), self.L)


def extend_cylindrical(curve: GeodesicSolution, V: CurveField, t0: float, window: float | None = None,
                       newton_tol: float = 1e-13) -> CylindricalExtension:
    """Extend ``V`` off the curve, constant on hyperplanes transverse to the tangent at ``t0``.

    A constant rotation ``L`` sends ``gamma'(t0)`` to the first axis.  The
    extension at ``x`` is ``V(tau)`` where ``(L gamma(tau))^1 = (L x)^1``.
    """
    u0 = curve.velocity(t0)
    if np.linalg.norm(u0) == 0:
        raise ParameterError("tangent vanishes at t0")
    L = householder_to_first_axis(u0)
    a, b = curve.t_span
    ts = np.linspace(a, b, 2001)
    speed = (curve.velocity(ts) @ L.T)[:, 0]
    good = speed >= 0.5 * np.linalg.norm(u0)
    i0 = int(np.argmin(np.abs(ts - t0)))
    if not good[i0]:
        raise ParameterError("no axis-adapted window around t0")
    lo = i0
    while lo > 0 and good[lo - 1]:
        lo -= 1
    hi = i0
    while hi < len(ts) - 1 and good[hi + 1]:
        hi += 1
    t_lo, t_hi = ts[lo], ts[hi]
    if window is not None:
        t_lo, t_hi = max(t_lo, t0 - window), min(t_hi, t0 + window)
    first = lambda t: (curve.position(t) @ L.T)[..., 0]
    y_lo, y_hi = first(t_lo), first(t_hi)

    def tau(y):
        y1 = np.clip(y[..., 0], y_lo, y_hi)
        t = t0 + (y1 - first(np.full(y1.shape, t0))) / np.linalg.norm(u0)
        t = np.clip(t, t_lo, t_hi)
        for _ in range(50):
            f = first(t) - y1
            fp = (curve.velocity(t) @ L.T)[..., 0]
            step = f / fp
            t = np.clip(t - step, t_lo, t_hi)
            if np.max(np.abs(step)) < newton_tol:
                break
        return t

    def value(x):
        return V(tau(x @ L.T))

    def jac(x):
        t = tau(x @ L.T)
        fp = (curve.velocity(t) @ L.T)[..., 0]
        dV = V.derivative(t) / fp[..., None]
        # d tau / d x_j = L[0, j] / fp
        return np.einsum("j,...i->...ji", L[0], dV)

    ext = CylindricalExtension(VectorField(value, jac), L, (t_lo, t_hi), curve)
    ext._tau = tau
    return ext
