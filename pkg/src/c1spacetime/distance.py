"""Lorentzian distance estimates in 1+1 dimensions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .geodesics import integrate_geodesic
from .geometry import Metric, ParameterError


@dataclass
class LorentzianDistanceEstimate:
    p: list[float]
    q: list[float]
    lower: float
    upper: float
    gap: float
    extrapolated: float | None
    reachable: bool
    resolution: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _segment_lengths(g: Metric, t0, x0, dt, dx):
    """Lorentzian length of straight segments by 3-point Gauss; ``-inf`` where not causal."""
    nodes = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
    weights = np.array([5, 8, 5]) / 18.0
    total = np.zeros(np.broadcast(t0, x0, dx).shape)
    ok = np.ones(total.shape, dtype=bool)
    for s, w in zip(nodes, weights):
        pts = np.stack(np.broadcast_arrays(t0 + s * dt, x0 + s * dx), axis=-1)
        gm = g.metric(pts)
        q = gm[..., 0, 0] * dt * dt + 2 * gm[..., 0, 1] * dt * dx + gm[..., 1, 1] * dx * dx
        ok &= q <= 0
        total += w * np.sqrt(np.maximum(-q, 0.0))
    return np.where(ok, total, -np.inf)


def slope_set(count: int = 16) -> list[tuple[int, int]]:
    """Edge vectors ``(layers, shift)``: vertical plus ``count // 2`` symmetric pairs of
    reduced fractions ``shift/layers`` with ``|shift| < layers``, smallest denominators first."""
    out = [(1, 0)]
    m = 2
    while len(out) < 1 + 2 * (count // 2):
        for s in range(1, m):
            if math.gcd(s, m) == 1 and len(out) < 1 + 2 * (count // 2):
                out += [(m, s), (m, -s)]
        m += 1
    return out


def max_light_speed(g: Metric, samples: int = 2001) -> float:
    """Largest coordinate speed ``|dx/dt|`` of null directions over the chart (sampled)."""
    pts = g.chart.grid([int(np.sqrt(samples)) + 1, int(np.sqrt(samples)) + 1])
    gm = g.metric(pts)
    a, b, c = gm[:, 1, 1], gm[:, 0, 1], gm[:, 0, 0]
    disc = np.sqrt(np.maximum(b * b - a * c, 0.0))
    return float(np.max(np.maximum(np.abs((-b + disc) / a), np.abs((-b - disc) / a))))


def grid_lower_bound(g: Metric, p, q, steps: int, slopes: int = 16) -> float:
    """Longest causal path on a layered grid from ``p`` to ``q`` (0 when unreachable).

    Layers are ``T/steps`` apart in ``t``.  Nodes sit one light-crossing
    apart in ``x`` on a grid sheared along the segment ``pq``, so both ends
    are nodes; edges join nodes along the slopes of :func:`slope_set`.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    T = q[0] - p[0]
    if T <= 0:
        return 0.0
    dt = T / steps
    c = max_light_speed(g)
    span = q[1] - p[1]
    if abs(span) >= c * T:
        return 0.0
    shear = span / steps
    dx = c * dt
    lo = max(g.chart.lower[1], p[1] - c * T * 1.01)
    hi = min(g.chart.upper[1], p[1] + c * T * 1.01)
    k_lo = int(np.ceil((lo - p[1] - max(span, 0.0)) / dx - 1e-9))
    k_hi = int(np.floor((hi - p[1] - min(span, 0.0)) / dx + 1e-9))
    ks = np.arange(k_lo, k_hi + 1)
    origin = -k_lo

    def xs(i):
        return p[1] + i * shear + dx * ks

    best = np.full((steps + 1, ks.size), -np.inf)
    best[0, origin] = 0.0
    edges = slope_set(slopes)
    for i in range(steps):
        alive = np.flatnonzero(np.isfinite(best[i]))
        if alive.size == 0:
            continue
        t0 = p[0] + i * dt
        x0 = xs(i)
        for m, s in edges:
            if i + m > steps:
                continue
            tgt = alive + s
            keep = (tgt >= 0) & (tgt < ks.size)
            src = alive[keep]
            if src.size == 0:
                continue
            x1 = xs(i + m)[src + s]
            inside = (x1 >= g.chart.lower[1]) & (x1 <= g.chart.upper[1])
            src = src[inside]
            if src.size == 0:
                continue
            lens = _segment_lengths(g, t0, x0[src], m * dt, m * shear + s * dx)
            np.maximum.at(best[i + m], src + s, best[i, src] + lens)
    val = best[steps, origin]
    return float(val) if np.isfinite(val) else 0.0


def shooting_length(g: Metric, p, q, scan: int = 41) -> float | None:
    """Longest geodesic from ``p`` through ``q``, found by scanning and bisecting the initial slope.

    Initial velocities are ``(1, u)``; returns None when no geodesic hits ``q``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    T = q[0] - p[0]
    gm = g.metric(p)
    a, b, cc = gm[1, 1], gm[0, 1], gm[0, 0]
    disc = np.sqrt(max(b * b - a * cc, 0.0))
    u_min, u_max = sorted(((-b - disc) / a, (-b + disc) / a))
    span = (0.0, 4.0 * T)

    def shoot(u):
        sol = integrate_geodesic(g, p, [1.0, u], span)
        ts = sol.samples(2001)
        tt = sol.position(ts)[:, 0]
        if tt.max() < q[0]:
            return np.nan, None
        j = int(np.argmax(tt >= q[0]))
        if j == 0:
            return np.nan, None
        s_hit = brentq(lambda s: sol.position(s)[0] - q[0], ts[j - 1], ts[j], xtol=1e-14)
        return float(sol.position(s_hit)[1] - q[1]), (sol, s_hit)

    us = np.unique(np.concatenate([np.linspace(u_min, u_max, scan + 2)[1:-1], [0.0]]))
    misses = [shoot(u)[0] for u in us]
    roots = [u for u, f in zip(us, misses) if f == 0.0]
    for (u0, f0), (u1, f1) in zip(zip(us, misses), zip(us[1:], misses[1:])):
        if np.isfinite(f0) and np.isfinite(f1) and f0 * f1 < 0:
            roots.append(brentq(lambda u: shoot(u)[0], u0, u1, xtol=1e-14))
    lengths = []
    for u in roots:
        _, hit = shoot(u)
        if hit is None:
            continue
        sol, s_hit = hit
        v = sol.velocity(0.0)
        lengths.append(float(np.sqrt(max(-g.inner(p, v, v), 0.0)) * s_hit))
    return max(lengths) if lengths else None


def lorentz_distance_1p1(g: Metric, p, q, resolution: int = 400) -> LorentzianDistanceEstimate:
    if g.dim != 2:
        raise ParameterError("the distance estimator works in 1+1 dimensions")
    g.chart.check(np.asarray([p, q], dtype=float))
    lower = grid_lower_bound(g, p, q, resolution)
    reachable = lower > 0
    if not reachable:
        return LorentzianDistanceEstimate(list(map(float, p)), list(map(float, q)), 0.0, 0.0, 0.0, 0.0, False,
                                          resolution)
    coarse = grid_lower_bound(g, p, q, resolution // 2)
    # first-order Richardson across the two resolutions
    extrapolated = lower + (lower - coarse)
    upper = shooting_length(g, p, q)
    if upper is None:
        upper = float("nan")
    return LorentzianDistanceEstimate(list(map(float, p)), list(map(float, q)), lower, upper, upper - lower,
                                      extrapolated, True, resolution)
