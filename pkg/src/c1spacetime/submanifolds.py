"""Spacelike submanifold patches: second fundamental form, convergence, focal and trapped checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .curvature import christoffel_at, check_null_ec, fibonacci_directions
from .focusing import HypothesisError, TidalProfile, detect_conjugate, integrate_jacobi, raychaudhuri_residual
from .geodesics import FrameField, integrate_geodesic, parallel_transport
from .geometry import ChartBox, GeometryError, Metric, ParameterError


class DegenerateMetricError(GeometryError):
    """Induced metric of a patch is not positive definite."""


@dataclass(frozen=True)
class SubmanifoldPatch:
    """Spacelike embedding ``u -> x(u)`` of a ``k``-dimensional patch, ``1 <= k <= n - 2``.

    ``jacobian(u)`` is ``(n, k)`` and ``hessian(u)`` is ``(n, k, k)``.
    """

    metric: Metric
    embed: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    k: int
    name: str = "patch"

    @property
    def codim(self) -> int:
        return self.metric.dim - self.k

    def point(self, u) -> np.ndarray:
        return np.asarray(self.embed(np.asarray(u, dtype=float)), dtype=float)

    def induced(self, u) -> np.ndarray:
        J = self.jacobian(np.asarray(u, dtype=float))
        return J.T @ self.metric.metric(self.point(u)) @ J

    def _check(self, u):
        G = self.induced(u)
        w = np.linalg.eigvalsh(G)
        if w[0] <= 1e-12 * max(1.0, w[-1]):
            raise DegenerateMetricError(f"induced metric not positive definite at u={np.asarray(u).tolist()}")
        return G

    def tangent_frame(self, u) -> np.ndarray:
        """Rows ``e_1..e_k``: induced-orthonormal tangent vectors in ambient components."""
        G = self._check(u)
        L = np.linalg.cholesky(G)
        return np.linalg.solve(L, self.jacobian(np.asarray(u, dtype=float)).T)

    def normal_projection(self, u, w) -> np.ndarray:
        J = self.jacobian(np.asarray(u, dtype=float))
        gm = self.metric.metric(self.point(u))
        G = self._check(u)
        return w - J @ np.linalg.solve(G, J.T @ gm @ w)

    def normal_frame(self, u) -> np.ndarray:
        """Rows ``n_0..n_{m-1}``: orthonormal normal frame, ``n_0`` future timelike."""
        x = self.point(u)
        gm = self.metric.metric(x)
        J = self.jacobian(np.asarray(u, dtype=float))
        # orthogonal complement of the tangents, then Gram-Schmidt starting from the time direction
        _, _, Vt = np.linalg.svd(J.T @ gm)
        basis = Vt[self.k:]
        T = self.metric.time_vector(x)
        t_n = self.normal_projection(u, T)
        q = t_n @ gm @ t_n
        if q >= 0:
            raise DegenerateMetricError("normal space is not Lorentzian")
        legs, signs = [t_n / np.sqrt(-q)], [-1.0]
        for w in basis:
            for e, s in zip(legs, signs):
                w = w - s * (e @ gm @ w) * e
            nrm = w @ gm @ w
            if nrm > 1e-10 * max(1.0, float(np.max(np.abs(gm)))):
                legs.append(w / np.sqrt(nrm))
                signs.append(1.0)
            if len(legs) == self.codim:
                break
        return np.array(legs)

    def _tangent_coefficients(self, u, v) -> np.ndarray:
        J = self.jacobian(np.asarray(u, dtype=float))
        c, *_ = np.linalg.lstsq(J, np.asarray(v, dtype=float), rcond=None)
        if np.linalg.norm(J @ c - v) > 1e-9 * max(1.0, np.linalg.norm(v)):
            raise ParameterError("vector is not tangent to the patch")
        return c

    def second_fundamental_form_coords(self, u) -> np.ndarray:
        """``II(d_a x, d_b x)`` for coordinate tangents, shape ``(k, k, n)``."""
        u = np.asarray(u, dtype=float)
        x = self.point(u)
        J = self.jacobian(u)
        gamma = christoffel_at(self.metric, x)
        acc = np.moveaxis(self.hessian(u), 0, -1) + np.einsum("mij,ia,jb->abm", gamma, J, J)
        return np.array([[self.normal_projection(u, acc[a, b]) for b in range(self.k)] for a in range(self.k)])

    def second_fundamental_form(self, u, v, w) -> np.ndarray:
        """Normal part of the ambient derivative of ``w`` along ``v`` (both tangent, ambient components)."""
        cv = self._tangent_coefficients(u, v)
        cw = self._tangent_coefficients(u, w)
        return np.einsum("a,b,abm->m", cv, cw, self.second_fundamental_form_coords(u))

    def mean_curvature(self, u) -> np.ndarray:
        G = self._check(u)
        II = self.second_fundamental_form_coords(u)
        return np.einsum("ab,abm->m", np.linalg.inv(G), II) / self.k

    def convergence(self, u, v) -> float:
        H = self.mean_curvature(u)
        return float(H @ self.metric.metric(self.point(u)) @ np.asarray(v, dtype=float))

    def weingarten(self, u, nu, frame: np.ndarray | None = None) -> np.ndarray:
        """``S_ij = g(II(e_i, e_j), nu)`` on an orthonormal tangent frame."""
        E = self.tangent_frame(u) if frame is None else frame
        gm = self.metric.metric(self.point(u))
        return np.array([[self.second_fundamental_form(u, a, b) @ gm @ nu for b in E] for a in E])

    def null_normals(self, u, count: int = 16) -> np.ndarray:
        """Future null normals ``n_0 + w`` with ``w`` unit in the spacelike normal directions."""
        N = self.normal_frame(u)
        m = self.codim
        if m == 2:
            dirs = np.array([[1.0], [-1.0]])
        else:
            dirs = fibonacci_directions(m - 1, count)
        return N[0] + dirs @ N[1:]


def coordinate_sphere(metric: Metric, center, radius: float, t0: float = 0.0) -> SubmanifoldPatch:
    """Coordinate round sphere of ``radius`` in the slice ``t = t0``; 2-sphere in 4D, circle in 3D."""
    n = metric.dim
    c = np.asarray(center, dtype=float)
    if c.size != n - 1:
        raise ParameterError("center needs the spatial coordinates only")
    if n == 4:
        def embed(u):
            th, ph = u
            return np.concatenate([[t0], c + radius * np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph),
                                                                np.cos(th)])])

        def jac(u):
            th, ph = u
            J = np.zeros((4, 2))
            J[1:, 0] = radius * np.array([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)])
            J[1:, 1] = radius * np.array([-np.sin(th) * np.sin(ph), np.sin(th) * np.cos(ph), 0.0])
            return J

        def hess(u):
            th, ph = u
            H = np.zeros((4, 2, 2))
            H[1:, 0, 0] = -radius * np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
            H[1:, 0, 1] = H[1:, 1, 0] = radius * np.array([-np.cos(th) * np.sin(ph), np.cos(th) * np.cos(ph), 0.0])
            H[1:, 1, 1] = -radius * np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), 0.0])
            return H

        k = 2
    elif n == 3:
        def embed(u):
            return np.concatenate([[t0], c + radius * np.array([np.cos(u[0]), np.sin(u[0])])])

        def jac(u):
            return np.array([[0.0], [-radius * np.sin(u[0])], [radius * np.cos(u[0])]])

        def hess(u):
            return np.array([[[0.0]], [[-radius * np.cos(u[0])]], [[-radius * np.sin(u[0])]]])

        k = 1
    else:
        raise ParameterError("coordinate spheres need n = 3 or 4")
    return SubmanifoldPatch(metric, embed, jac, hess, k, f"sphere(r={radius})")


def coordinate_plane(metric: Metric, origin, axes: Sequence[int]) -> SubmanifoldPatch:
    """Affine coordinate plane ``origin + sum u_a e_{axes[a]}``."""
    o = np.asarray(origin, dtype=float)
    n = metric.dim
    k = len(axes)
    J = np.zeros((n, k))
    for a, ax in enumerate(axes):
        J[ax, a] = 1.0
    return SubmanifoldPatch(metric, lambda u: o + J @ u, lambda u: J, lambda u: np.zeros((n, k, k)), k,
                            f"plane{tuple(axes)}")


def _focal_frame(metric: Metric, curve, patch: SubmanifoldPatch, u, nu) -> FrameField:
    """Parallel frame whose screen starts with the patch tangents, then the screen normals."""
    x = patch.point(u)
    gm = metric.metric(x)
    E = patch.tangent_frame(u)
    N = patch.normal_frame(u)
    # transverse null normal ell with g(nu, ell) = -2
    cand = [N[0] + s * w for w in N[1:] for s in (1.0, -1.0)]
    ell = max(cand, key=lambda c: -(c @ gm @ nu))
    ell = -2 * ell / (ell @ gm @ nu)
    rest = []
    for w in N[1:]:
        w = w - ((w @ gm @ ell) / (nu @ gm @ ell)) * nu - ((w @ gm @ nu) / (ell @ gm @ nu)) * ell
        for e in rest:
            w = w - (e @ gm @ w) * e
        q = w @ gm @ w
        if q > 1e-10:
            rest.append(w / np.sqrt(q))
        if len(rest) == patch.codim - 2:
            break
    legs = np.array(list(E) + rest + [0.5 * (nu - ell), 0.5 * (nu + ell)])
    transport = parallel_transport(metric, curve, legs, curve.t_span[0])
    frame = FrameField(metric, curve, transport, metric.dim - 2, True)
    ts = np.linspace(curve.t_span[0], curve.t_span[1], 100)
    frame.certificate = {"checkpoints": 100, "max_error": float(np.max(frame.orthonormality_error(ts)))}
    return frame


@dataclass
class FocalReport:
    c: float
    b: float
    found: bool
    t_star: float | None
    hypotheses: dict
    residuals: dict = field(default_factory=dict)

    @property
    def not_maximising(self) -> bool:
        return self.found and self.t_star is not None and self.t_star <= self.b

    def to_json(self) -> dict:
        return {"hypotheses": self.hypotheses,
                "conjugate_or_focal": {"found": self.found, "t_star": self.t_star, "within_b": self.not_maximising},
                "c": self.c, "b": self.b, "residuals": self.residuals}


def focal_experiment(metric: Metric, patch: SubmanifoldPatch, u, nu, b: float, delta: float = 1e-2,
                     samples: int = 41, tol: float = 1e-9) -> FocalReport:
    """Follow the null geodesic from ``x(u)`` along ``nu`` and find the first focal point before ``b``.

    Screen Jacobi data are ``A = Id, A' = -S_nu`` on the patch tangents and
    ``A = 0, A' = Id`` on the remaining screen normals.  The curvature
    hypothesis is the Ricci form in codimension 2 and the tangent curvature
    sum otherwise.
    """
    u = np.asarray(u, dtype=float)
    nu = np.asarray(nu, dtype=float)
    x = patch.point(u)
    gm = metric.metric(x)
    scale = float(nu @ nu)
    if abs(nu @ gm @ nu) > tol * scale:
        raise ParameterError("nu is not null")
    if np.max(np.abs(patch.jacobian(u).T @ gm @ nu)) > tol * np.sqrt(scale) * max(1.0, np.max(np.abs(gm))):
        raise ParameterError("nu is not normal to the patch")
    c = patch.convergence(u, nu)
    if c <= 0:
        raise ParameterError(f"convergence k_S(nu) = {c:.3e} is not positive")
    if b <= 1 / c:
        raise ParameterError("b must exceed 1/k_S(nu)")
    curve = integrate_geodesic(metric, x, nu, (0.0, float(b)))
    if curve.truncated:
        raise GeometryError(f"geodesic left the chart before b ({curve.exit_reason})")
    frame = _focal_frame(metric, curve, patch, u, nu)
    d, k = frame.d, patch.k
    S = patch.weingarten(u, nu, frame.legs(0.0)[:k])
    A0 = np.zeros((d, d))
    A0[:k, :k] = np.eye(k)
    Ad0 = np.zeros((d, d))
    Ad0[:k, :k] = -S
    Ad0[k:, k:] = np.eye(d - k)
    if metric.regularity.is_smooth and metric.max_order >= 2:
        profile = TidalProfile.from_geodesic(metric, curve, frame)
        vals = [profile(t) for t in np.linspace(0.0, b, samples)]
        form = [float(np.trace(M)) if patch.codim == 2 else float(np.trace(M[:k, :k])) for M in vals]
        hyp = {"verified": bool(min(form) >= -delta), "kind": "ricci" if patch.codim == 2 else "tangent-sum",
               "margins": {"min_value_plus_delta": min(form) + delta}}
        if not hyp["verified"]:
            raise HypothesisError("curvature hypothesis fails along the normal geodesic", min(form))
    else:
        raise ParameterError("focal experiments need a metric with second derivatives")
    traj = integrate_jacobi(profile, 0.0, A0, Ad0, (0.0, float(b)), rtol=1e-11, atol=1e-13)
    t_star = detect_conjugate(traj)
    end = t_star if t_star is not None else b
    res = {"raychaudhuri": raychaudhuri_residual(traj, window=(0.0, end)), "lagrange": traj.lagrange_residual(),
           "frame": frame.certificate["max_error"]}
    return FocalReport(c, float(b), t_star is not None, t_star, hyp, res)


@dataclass
class TrappedData:
    patches: list[SubmanifoldPatch]
    samples: list[np.ndarray]


def trapped_certificate(data: TrappedData, directions: int = 16, fam=None, K: ChartBox | None = None) -> dict:
    """Minimum convergence over sampled future null normals and the timelike-past test on ``H_S``.

    With a mollified family ``fam`` the null energy scan of the curvature
    module is run on ``K`` and attached.
    """
    min_k, witness, past_timelike, witness_H = np.inf, None, True, None
    for patch, us in zip(data.patches, data.samples):
        g = patch.metric
        for u in np.atleast_2d(us):
            x = patch.point(u)
            gm = g.metric(x)
            H = patch.mean_curvature(u)
            T = g.time_vector(x)
            hh, ht = float(H @ gm @ H), float(H @ gm @ T)
            if not (hh < 0 and ht > 0):
                past_timelike = False
                witness_H = witness_H or {"patch": patch.name, "u": u.tolist(), "g(H,H)": hh, "g(H,T)": ht}
            for nu in patch.null_normals(u, directions):
                val = float(H @ gm @ nu)
                if val < min_k:
                    min_k, witness = val, {"patch": patch.name, "u": u.tolist(), "nu": nu.tolist()}
    out = {"min_k": float(min_k), "witness": witness, "H_past_timelike": past_timelike,
           "H_witness": witness_H, "trapped": bool(min_k > 0 and past_timelike)}
    if fam is not None:
        out["null_energy"] = check_null_ec(fam, K).to_json()
    return out
