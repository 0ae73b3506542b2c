"""Jacobi tensors, matrix Riccati flow and the focusing constants along a geodesic."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .curvature import tidal_force_matrix
from .geometry import GeometryError, ParameterError


class HypothesisError(GeometryError):
    """Curvature hypotheses of a focusing experiment do not hold on the sampled run."""

    def __init__(self, message: str, worst: float | None = None):
        super().__init__(message)
        self.worst = worst


class FocusingSearchError(GeometryError):
    pass


@dataclass(frozen=True)
class TidalProfile:
    """Symmetric ``d x d`` tidal matrices ``t -> [R](t)`` in a parallel frame."""

    interval: tuple[float, float]
    sampler: Callable[[float], np.ndarray]
    d: int
    source: str = "analytic"
    knots: tuple[float, ...] = ()

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.sampler(t), dtype=float)

    @classmethod
    def constant(cls, M, interval=(-np.inf, np.inf)) -> "TidalProfile":
        M = np.array(M, dtype=float)
        if M.ndim == 1:
            M = np.diag(M)
        return cls(tuple(interval), lambda t, M=M: M, M.shape[0], "analytic")

    @classmethod
    def bump(cls, M, r: float, taper: float, interval=(-np.inf, np.inf)) -> "TidalProfile":
        """``M`` on ``[-r, r]``, cosine taper to zero over ``taper``, zero beyond."""
        M = np.array(M, dtype=float)
        if M.ndim == 1:
            M = np.diag(M)

        def sample(t):
            a = abs(t)
            if a <= r:
                return M
            if a >= r + taper:
                return 0.0 * M
            return 0.5 * (1 + math.cos(math.pi * (a - r) / taper)) * M

        return cls(tuple(interval), sample, M.shape[0], "analytic", (-r - taper, -r, r, r + taper))

    @classmethod
    def from_geodesic(cls, metric, curve, frame, symmetrise: bool = True) -> "TidalProfile":
        def sample(t):
            M = tidal_force_matrix(metric, curve, frame, t)
            return 0.5 * (M + M.T) if symmetrise else M

        return cls(tuple(curve.t_span), sample, frame.d, "geodesic")

    def check(self, samples: int = 201, lipschitz: float | None = None, tol: float = 1e-10) -> dict:
        lo, hi = self.interval
        ts = np.linspace(lo, hi, samples)
        Ms = np.array([self(t) for t in ts])
        asym = float(np.max(np.abs(Ms - np.swapaxes(Ms, 1, 2))))
        jumps = np.max(np.abs(np.diff(Ms, axis=0)), axis=(1, 2)) / np.diff(ts)
        out = {"max_asymmetry": asym, "symmetric": asym <= tol * max(1.0, float(np.max(np.abs(Ms)))),
               "max_slope": float(np.max(jumps)) if jumps.size else 0.0}
        if lipschitz is not None:
            out["continuous"] = out["max_slope"] <= lipschitz
        return out


@dataclass(frozen=True)
class JacobiRiccatiState:
    t: float
    A: np.ndarray
    Adot: np.ndarray
    B: np.ndarray | None
    theta: float | None
    shear: np.ndarray | None


class JacobiTrajectory:
    """Dense solution of ``A'' + [R] A = 0`` with the derived Riccati quantities."""

    def __init__(self, profile: TidalProfile, t0: float, t1: float, sol, start_rank: int, stats: dict,
                 grid: np.ndarray | None = None):
        self.profile = profile
        self.t0 = t0
        self.t1 = t1
        self.d = profile.d
        self._sol = sol
        self.start_rank = start_rank
        self.stats = stats
        self.grid = np.array([t0, t1]) if grid is None else grid
        self._lagrange0 = self.lagrange(t0)

    @property
    def window(self) -> tuple[float, float]:
        return (min(self.t0, self.t1), max(self.t0, self.t1))

    def _split(self, t):
        y = self._sol(t)
        d = self.d
        if np.ndim(t) == 0:
            return y[: d * d].reshape(d, d), y[d * d:].reshape(d, d)
        y = y.T
        return y[:, : d * d].reshape(-1, d, d), y[:, d * d:].reshape(-1, d, d)

    def A(self, t) -> np.ndarray:
        return self._split(t)[0]

    def Adot(self, t) -> np.ndarray:
        return self._split(t)[1]

    def B(self, t) -> np.ndarray:
        A, Ad = self._split(t)
        return np.linalg.solve(np.swapaxes(A, -1, -2), np.swapaxes(Ad, -1, -2)).swapaxes(-1, -2)

    def theta(self, t) -> np.ndarray:
        return np.trace(self.B(t), axis1=-2, axis2=-1)

    def shear(self, t) -> np.ndarray:
        B = self.B(t)
        th = np.trace(B, axis1=-2, axis2=-1)
        return B - (th / self.d)[..., None, None] * np.eye(self.d)

    def state(self, t: float, cond_max: float = 1e10) -> JacobiRiccatiState:
        A, Ad = self._split(float(t))
        if np.linalg.cond(A) > cond_max:
            return JacobiRiccatiState(float(t), A, Ad, None, None, None)
        B = self.B(float(t))
        th = float(np.trace(B))
        return JacobiRiccatiState(float(t), A, Ad, B, th, B - th / self.d * np.eye(self.d))

    def lagrange(self, t) -> np.ndarray:
        A, Ad = self._split(t)
        return np.swapaxes(Ad, -1, -2) @ A - np.swapaxes(A, -1, -2) @ Ad

    def lagrange_residual(self, samples: int = 401) -> float:
        ts = np.linspace(*self.window, samples)
        return float(np.max(np.abs(self.lagrange(ts) - self._lagrange0)))

    def jacobi_residual(self, samples: int = 401, h: float = 1e-4) -> float:
        """Max of ``|A'' + R A|`` with ``A''`` from central differences of the dense ``A'``."""
        lo, hi = self.window
        ts = np.linspace(lo + h, hi - h, samples)
        Add = (self.Adot(ts + h) - self.Adot(ts - h)) / (2 * h)
        R = np.array([self.profile(t) for t in ts])
        return float(np.max(np.abs(Add + R @ self.A(ts))))


class _Piecewise:
    """Dense outputs of consecutive solves glued at their shared endpoints."""

    def __init__(self, edges, pieces):
        self.bounds = np.sort(np.asarray(edges[1:-1], dtype=float))
        self.pieces = pieces if edges[-1] > edges[0] else pieces[::-1]

    def __call__(self, t):
        if np.ndim(t) == 0:
            return self.pieces[int(np.searchsorted(self.bounds, t))](t)
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.bounds, t)
        out = np.empty((self.pieces[0](t[:1]).shape[0], t.size))
        for k in np.unique(idx):
            sel = idx == k
            out[:, sel] = self.pieces[k](t[sel])
        return out


def integrate_jacobi(profile: TidalProfile, t0: float, A0, Adot0, span: Sequence[float],
                     rtol: float = 1e-12, atol: float = 1e-14, method: str = "DOP853",
                     max_step: float | None = None) -> JacobiTrajectory:
    """Integrate ``A'' + [R] A = 0`` from ``(A0, Adot0)`` at ``t0`` to the far end of ``span``."""
    d = profile.d
    A0 = np.array(A0, dtype=float).reshape(d, d)
    Adot0 = np.array(Adot0, dtype=float).reshape(d, d)
    t0 = float(t0)
    t1 = float(span[1]) if abs(float(span[1]) - t0) >= abs(float(span[0]) - t0) else float(span[0])
    if t1 == t0:
        raise ParameterError("empty integration span")

    def rhs(t, y):
        A = y[: d * d].reshape(d, d)
        return np.concatenate([y[d * d:], -(profile(t) @ A).ravel()])

    y0 = np.concatenate([A0.ravel(), Adot0.ravel()])
    # restart at profile knots so steps never straddle a kink or skip a bump
    lo, hi = sorted((t0, t1))
    cuts = sorted(k for k in profile.knots if lo < k < hi)
    edges = [t0] + (cuts if t1 > t0 else cuts[::-1]) + [t1]
    length = abs(t1 - t0)
    max_step = length / 200 if max_step is None else max_step
    pieces, nfev, steps, first, grid = [], 0, 0, None, []
    for a, b in zip(edges[:-1], edges[1:]):
        sol = solve_ivp(rhs, (a, b), y0, method=method, rtol=rtol, atol=atol, dense_output=True,
                        max_step=max_step, first_step=min(1e-4 * max(1.0, length), abs(b - a)) if first is None
                        else None)
        if sol.status != 0:
            raise GeometryError(f"Jacobi integration failed: {sol.message}")
        if first is None and sol.t.size > 1:
            first = float(abs(sol.t[1] - sol.t[0]))
        pieces.append(sol.sol)
        grid.append(sol.t)
        nfev += int(sol.nfev)
        steps += int(sol.t.size - 1)
        y0 = sol.y[:, -1]
    stats = {"nfev": nfev, "steps": steps, "first_step": first or 0.0}
    traj_grid = np.unique(np.concatenate(grid))
    dense = pieces[0] if len(pieces) == 1 else _Piecewise(edges, pieces)
    rank = int(np.linalg.matrix_rank(A0, tol=1e-12 * max(1.0, float(np.max(np.abs(A0))))))
    return JacobiTrajectory(profile, t0, t1, dense, rank, stats, traj_grid)


def detect_conjugate(traj: JacobiTrajectory, window: Sequence[float] | None = None, samples: int = 4000,
                     xtol: float = 1e-10, sv_tol: float = 1e-7) -> float | None:
    """First parameter after the start where ``det A`` vanishes, or None.

    The zero of order ``d - rank A(t0)`` at the start is divided out.  Zeros
    without a sign change (repeated eigenvalues) are caught as near-zero local
    minima of the smallest singular value.
    """
    t0 = traj.t0
    sgn = 1.0 if traj.t1 > t0 else -1.0
    k = traj.d - traj.start_rank
    lo, hi = traj.window if window is None else (float(window[0]), float(window[1]))
    guard = 10 * traj.stats.get("first_step", 0.0)
    a = max(lo, t0 + guard) if sgn > 0 else min(hi, t0 - guard)
    b = hi if sgn > 0 else lo
    if (b - a) * sgn <= 0:
        return None

    def reduced_det(t):
        return np.linalg.det(traj.A(t)) / abs(t - t0) ** k

    def reduced_sv(t):
        s = np.linalg.svd(traj.A(t), compute_uv=False)[-1]
        return s / abs(t - t0) if k else s

    ts = np.linspace(a, b, samples)
    ts = np.unique(np.concatenate([ts, traj.grid[(traj.grid - a) * sgn > 0]]))
    ts = ts[((ts - a) * sgn >= 0) & ((b - ts) * sgn >= 0)]
    if sgn < 0:
        ts = ts[::-1]
    samples = ts.size
    dets = np.linalg.det(traj.A(ts)) / np.abs(ts - t0) ** k
    hits = []
    change = np.flatnonzero(np.sign(dets[:-1]) * np.sign(dets[1:]) < 0)
    if change.size:
        i = change[0]
        hits.append(brentq(reduced_det, ts[i], ts[i + 1], xtol=xtol))
    svs = np.linalg.svd(traj.A(ts), compute_uv=False)[:, -1]
    if k:
        svs = svs / np.abs(ts - t0)
    scale = np.max(np.abs(traj.A(ts)), axis=(1, 2))
    if k:
        scale = scale / np.abs(ts - t0)
    for i in range(1, samples - 1):
        # a zero crossing shows as a V-shaped dip at least halving the larger neighbour
        if svs[i] <= svs[i - 1] and svs[i] <= svs[i + 1] and svs[i] <= 0.5 * max(svs[i - 1], svs[i + 1]):
            if hits and (ts[i + 1] - hits[0]) * sgn >= 0:
                # the bracketed sign change comes first or coincides; keep its bisected root
                break
            lo_i, hi_i = sorted((ts[i - 1], ts[i + 1]))
            res = minimize_scalar(reduced_sv, bounds=(lo_i, hi_i), method="bounded", options={"xatol": xtol})
            if res.fun <= sv_tol * max(1.0, scale[i]):
                # the singular pair frozen at a neighbour gives a signed value to bisect
                U, _, Vt = np.linalg.svd(traj.A(ts[i - 1]))
                u, v = U[:, -1], Vt[-1]

                def signed(t):
                    return u @ traj.A(t) @ v

                if signed(lo_i) * signed(hi_i) < 0:
                    hits.append(float(brentq(signed, lo_i, hi_i, xtol=xtol)))
                else:
                    hits.append(float(res.x))
                break
    if not hits:
        return None
    return float(min(hits)) if sgn > 0 else float(max(hits))


def raychaudhuri_residual(traj: JacobiTrajectory, window: Sequence[float] | None = None, samples: int = 401,
                          h: float = 1e-3, cond_max: float = 1e8, normalise: bool = True) -> float:
    """Max of ``theta' + theta^2/d + tr(shear^2) + tr R`` over the window.

    ``theta'`` is a Richardson-extrapolated central difference of the dense
    output with the step shrunk near zeros of ``A``.  Points where ``A`` is nearly singular are skipped.  With
    ``normalise`` the residual is divided by the sum of the magnitudes of the
    four terms.
    """
    lo, hi = traj.window if window is None else window
    ts = np.linspace(lo, hi, samples + 2)[1:-1]
    ts = ts[np.linalg.cond(traj.A(ts)) < cond_max]
    if ts.size == 0:
        return 0.0
    th = traj.theta
    # theta ~ d/s near zeros of A, so the step shrinks with 1/|theta|
    hs = np.minimum(h, 0.005 * traj.d / np.maximum(np.abs(th(ts)), 1e-300))
    hs = np.minimum(hs, 0.25 * np.minimum(ts - lo, hi - ts))
    ok = (hs > 0) & (np.linalg.cond(traj.A(ts - 2 * hs)) < cond_max) & (np.linalg.cond(traj.A(ts + 2 * hs)) < cond_max)
    ts, hs = ts[ok], hs[ok]
    if ts.size == 0:
        return 0.0
    d1 = (th(ts + hs) - th(ts - hs)) / (2 * hs)
    d2 = (th(ts + 2 * hs) - th(ts - 2 * hs)) / (4 * hs)
    dtheta = (4 * d1 - d2) / 3
    theta = th(ts)
    sh = traj.shear(ts)
    trs2 = np.einsum("tij,tji->t", sh, sh)
    trR = np.array([np.trace(traj.profile(t)) for t in ts])
    terms = np.stack([dtheta, theta ** 2 / traj.d, trs2, trR])
    res = np.abs(terms.sum(axis=0))
    if normalise:
        res = res / np.maximum(np.abs(terms).sum(axis=0), 1.0)
    return float(np.max(res))


def _arccot(x: float) -> float:
    return 0.5 * np.pi - math.atan(x)


@dataclass(frozen=True)
class ComparisonProfile:
    """Closed-form Riccati comparison solutions ``H_{c,f}`` and ``H_{-C,f}`` with ``H(t1) = d f``."""

    c: float
    C: float
    f: float
    t1: float
    d: int

    def _phase(self, t):
        return np.sqrt(self.c) * (np.asarray(t, dtype=float) - self.t1) + _arccot(self.f / np.sqrt(self.c))

    def H_pos(self, t) -> np.ndarray:
        return self.d * np.sqrt(self.c) / np.tan(self._phase(t))

    def H_pos_prime(self, t) -> np.ndarray:
        return -self.d * self.c / np.sin(self._phase(t)) ** 2

    @property
    def blow_up(self) -> float:
        return self.t1 + (np.pi - _arccot(self.f / np.sqrt(self.c))) / np.sqrt(self.c)

    def _neg_branch(self):
        rC = np.sqrt(self.C)
        q = self.f / rC
        if abs(q) < 1:
            return "tanh", math.atanh(q)
        if abs(q) > 1:
            return "coth", math.atanh(1 / q)
        return "const", 0.0

    def H_neg(self, t) -> np.ndarray:
        rC = np.sqrt(self.C)
        kind, phi0 = self._neg_branch()
        s = rC * (np.asarray(t, dtype=float) - self.t1) + phi0
        if kind == "tanh":
            return self.d * rC * np.tanh(s)
        if kind == "coth":
            return self.d * rC / np.tanh(s)
        return self.d * self.f * np.ones_like(s)

    def H_neg_prime(self, t) -> np.ndarray:
        rC = np.sqrt(self.C)
        kind, phi0 = self._neg_branch()
        s = rC * (np.asarray(t, dtype=float) - self.t1) + phi0
        if kind == "tanh":
            return self.d * self.C / np.cosh(s) ** 2
        if kind == "coth":
            return -self.d * self.C / np.sinh(s) ** 2
        return np.zeros_like(s)

    def riccati_residuals(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Relative residuals of ``b' + b^2 + c`` and ``b' + b^2 - C`` for ``b = H/d``."""
        b, db = self.H_pos(t) / self.d, self.H_pos_prime(t) / self.d
        r1 = np.abs(db + b * b + self.c) / (np.abs(db) + b * b + self.c)
        b, db = self.H_neg(t) / self.d, self.H_neg_prime(t) / self.d
        r2 = np.abs(db + b * b - self.C) / (np.abs(db) + b * b + self.C)
        return r1, r2


def comparison_profile(c: float, C: float, f: float, t1: float, d: int) -> ComparisonProfile:
    if c <= 0 or C <= 0:
        raise ParameterError("comparison constants must be positive")
    return ComparisonProfile(float(c), float(C), float(f), float(t1), int(d))


def riccati_comparison_check(traj: JacobiTrajectory, profile: ComparisonProfile, window: Sequence[float],
                             samples: int = 401, tol: float = 1e-8, cond_max: float = 1e10) -> dict:
    """Check ``(H_{c,f}/d) Id - B >= 0`` on the window (before the cot blow-up)."""
    t1, r = float(window[0]), float(window[1])
    end = min(r, profile.blow_up - 1e-6)
    ts = np.linspace(t1, end, samples)
    if np.any(np.linalg.cond(traj.A(ts)) > cond_max):
        return {"ordering": None, "reason": "conjugate point already reached", "window": [t1, end]}
    B = traj.B(ts)
    B = 0.5 * (B + np.swapaxes(B, -1, -2))
    top = float(np.linalg.eigvalsh(B[0])[-1])
    if top > profile.f + tol * max(1.0, abs(profile.f)):
        raise ParameterError("comparison data does not dominate B at the start of the window")
    gaps = np.array([np.linalg.eigvalsh(h / profile.d * np.eye(traj.d) - b)[0]
                     for h, b in zip(profile.H_pos(ts), B)])
    scale = np.maximum(1.0, np.abs(profile.H_pos(ts)) / profile.d)
    worst = int(np.argmin(gaps / scale))
    return {"ordering": bool(np.all(gaps >= -tol * scale)), "min_gap": float(gaps[worst]),
            "at": float(ts[worst]), "window": [t1, end]}


@dataclass(frozen=True)
class FocusingConstants:
    c: float
    r: float
    delta: float
    T: float
    d: int
    margin: float
    blow_up: float

    @property
    def nu(self) -> float:
        return 4 * self.d / self.T

    @property
    def f(self) -> float:
        return float(np.sqrt(2 * self.nu / self.r + self.delta) + self.nu / self.d)

    def to_json(self) -> dict:
        return {"c": self.c, "r": self.r, "delta": self.delta, "T": self.T, "f": self.f, "nu": self.nu,
                "d": self.d, "margin": self.margin, "blow_up": self.blow_up}


def focusing_margin(c: float, r: float, delta: float, T: float, d: int) -> float:
    """Shear forced by the cot comparison over a length-``r`` window minus the Raychaudhuri budget.

    Positive values rule out a conjugate-free ``[-T, T]``: the comparison
    started from ``B <= f Id`` forces ``tr(shear^2)`` to integrate past
    ``2 nu + 2 r delta``, the most the expansion bound allows.
    """
    nu = 4 * d / T
    f = np.sqrt(2 * nu / r + delta) + nu / d
    rc = np.sqrt(c)
    phi0 = _arccot(f / rc)
    if phi0 + rc * r >= np.pi:
        return np.inf

    def forced(s):
        return max(-rc / math.tan(rc * s + phi0) - nu / d, 0.0) ** 2

    start = max(0.0, (0.5 * np.pi - phi0) / rc)
    val = quad(forced, start, r, epsabs=1e-14, epsrel=1e-12)[0] if start < r else 0.0
    return float(val - 2 * nu - 2 * r * delta)


def select_focusing_constants(c: float, r: float, d: int = 3, rtol: float = 1e-4) -> FocusingConstants:
    """Search ``(delta, T)`` with a positive :func:`focusing_margin`.

    ``T`` is bisected upward at the smallest ``delta`` and doubled, then the
    largest admissible ``delta`` is bisected.  Bounds ``T in [2r, 1e4 r]``,
    ``delta in [1e-8, c]``.
    """
    if c <= 0 or not 0 < r < np.pi / (4 * np.sqrt(c)):
        raise ParameterError("need c > 0 and 0 < r < pi/(4 sqrt(c))")
    d_min, d_max = 1e-8, float(c)
    T_lo, T_hi = 2 * r, 1e4 * r
    if focusing_margin(c, r, d_min, T_hi, d) <= 0:
        raise FocusingSearchError("no admissible T within [2r, 1e4 r]; the window r is too short for c")
    if focusing_margin(c, r, d_min, T_lo, d) <= 0:
        lo, hi = T_lo, T_hi
        while hi - lo > rtol * hi:
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if focusing_margin(c, r, d_min, mid, d) > 0 else (mid, hi)
        T_min = hi
    else:
        T_min = T_lo
    T = min(2 * T_min, T_hi)
    if focusing_margin(c, r, d_max, T, d) > 0:
        delta = d_max
    else:
        lo, hi = d_min, d_max
        while hi - lo > rtol * lo:
            mid = np.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
            lo, hi = (mid, hi) if focusing_margin(c, r, mid, T, d) > 0 else (lo, mid)
        delta = lo
    margin = focusing_margin(c, r, delta, T, d)
    prof = comparison_profile(c, 1.0, np.sqrt(2 * 4 * d / T / r + delta) + 4 / T, -r, d)
    return FocusingConstants(float(c), float(r), float(delta), float(T), int(d), margin, float(prof.blow_up))


@dataclass
class FocusingReport:
    hypotheses: dict
    found: bool
    t_star: float | None
    constants: FocusingConstants
    residuals: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.found and self.t_star is not None and self.t_star <= self.constants.T

    def to_json(self) -> dict:
        return {"hypotheses": self.hypotheses,
                "conjugate_or_focal": {"found": self.found, "t_star": self.t_star, "within_T": self.passed},
                "constants": self.constants.to_json(), "residuals": self.residuals}


def verify_focusing_hypotheses(profile: TidalProfile, constants: FocusingConstants, C: float | None = None,
                               samples: int = 2001) -> dict:
    """Sample ``tr R >= -delta`` on ``[-T, T]`` and ``R > diag(c, -C, ..)`` on ``[-r, r]``.

    Without ``C`` the second check reduces to the first diagonal entry, which
    is the limit of the condition as ``C`` grows.
    """
    T, r, c = constants.T, constants.r, constants.c
    ts = np.linspace(-T, T, samples)
    tr_min = min(float(np.trace(profile(t))) for t in ts)
    rs = np.linspace(-r, r, max(201, samples // 4))
    if C is None:
        lower = min(float(profile(t)[0, 0]) - c for t in rs)
    else:
        bound = np.diag([c] + [-C] * (profile.d - 1))
        lower = min(float(np.linalg.eigvalsh(profile(t) - bound)[0]) for t in rs)
    return {"verified": bool(tr_min >= -constants.delta and lower > 0),
            "margins": {"trace_min_plus_delta": tr_min + constants.delta, "diag_bound_min": lower}}


def focusing_experiment(profile: TidalProfile, constants: FocusingConstants, C: float | None = None,
                        samples: int = 2001) -> FocusingReport:
    """Run Jacobi data ``A(-T) = 0, A'(-T) = Id`` across ``[-T, T]`` and locate the first conjugate point."""
    if profile.d != constants.d:
        raise ParameterError("profile and constants disagree on the screen dimension")
    hyp = verify_focusing_hypotheses(profile, constants, C, samples)
    if not hyp["verified"]:
        m = hyp["margins"]
        raise HypothesisError("focusing hypotheses fail on the sampled profile",
                              min(m["trace_min_plus_delta"], m["diag_bound_min"]))
    T = constants.T
    traj = integrate_jacobi(profile, -T, np.zeros((profile.d, profile.d)), np.eye(profile.d), (-T, T))
    t_star = detect_conjugate(traj)
    window = (-T, t_star) if t_star is not None else (-T, T)
    residuals = {"raychaudhuri": raychaudhuri_residual(traj, window=(window[0], window[1])),
                 "lagrange": traj.lagrange_residual()}
    return FocusingReport(hyp, t_star is not None, t_star, constants, residuals)
