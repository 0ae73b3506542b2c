"""Perturb-and-limit probe for non-unique geodesics of C^{1,alpha} metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .geodesics import integrate_geodesic
from .geometry import GeometryError, Metric, ParameterError


class BranchingError(GeometryError):
    """Perturbed solutions do not settle as the perturbation shrinks."""


@dataclass
class BranchingReport:
    p: list[float]
    v: list[float]
    eta_grid: list[float]
    t_end: float
    limits: list[dict]
    clusters: list[dict]
    branch_count: int
    min_separation: float | None
    cluster_tol: float
    cauchy_tol: float
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"p": self.p, "v": self.v, "eta_grid": self.eta_grid, "t_end": self.t_end,
                "branch_count": self.branch_count, "min_separation": self.min_separation,
                "cluster_tol": self.cluster_tol, "cauchy_tol": self.cauchy_tol,
                "clusters": self.clusters, "limits": self.limits, "notes": self.notes}


def transverse_directions(v: np.ndarray) -> np.ndarray:
    """Euclidean-orthonormal basis of the complement of ``v``."""
    v = np.asarray(v, dtype=float)
    q, _ = np.linalg.qr(np.column_stack([v / np.linalg.norm(v), np.eye(v.size)]))
    return q[:, 1:v.size].T


def branch_probe(g: Metric, p, v, eta_grid: Sequence[float], span: Sequence[float] = (0.0, 1.0),
                 cluster_tol: float = 1e-2, cauchy_tol: float = 1e-3, rtol: float = 1e-10) -> BranchingReport:
    """Integrate from ``p +- eta e`` for transverse unit ``e`` and cluster the ``eta -> 0`` limits.

    The limit for each signed direction is its solution at the smallest
    ``eta``; it is accepted when the last two members of the sequence differ
    by less than ``cauchy_tol`` in terminal position.  Clusters use
    single linkage at ``cluster_tol``.
    """
    eta = np.asarray(sorted(eta_grid, reverse=True), dtype=float)
    if eta.size < 2 or np.any(eta <= 0):
        raise ParameterError("eta_grid needs at least two positive values")
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    notes = []
    if g.regularity.is_smooth:
        notes.append("smooth metric: unique continuation expected")
    t_end = float(span[1])
    limits = []
    for k, e in enumerate(transverse_directions(v)):
        for sign in (1.0, -1.0):
            ends = []
            for h in eta:
                sol = integrate_geodesic(g, p + sign * h * e, v, span, rtol=rtol, atol=min(1e-12, 1e-4 * h))
                if sol.truncated:
                    raise BranchingError("perturbed geodesic left the chart before the end of the span")
                ends.append(sol.state(t_end))
            ends = np.array(ends)
            step = float(np.linalg.norm(ends[-1, : g.dim] - ends[-2, : g.dim]))
            if step >= cauchy_tol:
                raise BranchingError(f"limit along eta_grid not Cauchy (last step {step:.3e})")
            limits.append({"direction": e.tolist(), "sign": sign, "terminal": ends[-1].tolist(),
                           "last_step": step})
    ends = np.array([lim["terminal"][: g.dim] for lim in limits])
    if len(ends) == 1:
        labels = np.array([1])
    else:
        labels = fcluster(linkage(ends, method="single"), t=cluster_tol, criterion="distance")
    clusters = []
    for lab in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == lab)
        clusters.append({"members": members.tolist(), "terminal": ends[members[0]].tolist()})
    reps = np.array([c["terminal"] for c in clusters])
    sep = None
    if len(reps) > 1:
        d = np.linalg.norm(reps[:, None, :] - reps[None, :, :], axis=-1)
        sep = float(np.min(d[np.triu_indices(len(reps), 1)]))
    return BranchingReport(p.tolist(), v.tolist(), eta.tolist(), t_end, limits, clusters, len(clusters), sep,
                           cluster_tol, cauchy_tol, notes)


def similarity_constant(alpha: float, kappa: float, px: float) -> tuple[float, float]:
    """Exponent and coefficient of the branch ``y = K t^(2/(1-alpha))`` of ``y'' = k_eff |y|^alpha``.

    ``k_eff = kappa (1+alpha) px^2 / 2`` is the force near ``y = 0`` for the
    static branching metric with conserved momentum ``px``.
    """
    k_eff = 0.5 * kappa * (1 + alpha) * px ** 2
    m = 2.0 / (1 - alpha)
    K = (k_eff / (m * (m - 1))) ** (1 / (1 - alpha))
    return m, K
