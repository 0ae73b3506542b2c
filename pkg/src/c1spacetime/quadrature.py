"""Composite Gauss-Legendre rules with geometric grading toward kinks."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def panel_rule(edges: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule with ``m`` nodes on every panel between consecutive ``edges``.

    ``edges`` has shape ``(..., E)`` and must be sorted along the last axis.
    Zero-length panels contribute zero weight, so batches of rules with
    different effective panel counts share one array shape.
    """
    x, w = gauss_legendre(m)
    a = edges[..., :-1, None]
    b = edges[..., 1:, None]
    half = 0.5 * (b - a)
    nodes = 0.5 * (a + b) + half * x
    weights = half * w
    shape = edges.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


def graded_edges(splits: np.ndarray, lo: float = -1.0, hi: float = 1.0, panels: int = 4,
                 levels: int = 8, ratio: float = 0.15) -> np.ndarray:
    """Panel edges on ``[lo, hi]`` refined geometrically around each split.

    ``splits`` has shape ``(..., S)``; entries outside ``(lo, hi)`` are
    harmless because every edge is clipped into the interval.
    """
    splits = np.asarray(splits, dtype=float)
    base = np.linspace(lo, hi, panels + 1)
    offsets = (hi - lo) * ratio ** np.arange(1, levels + 1)
    offsets = np.concatenate([-offsets, [0.0], offsets])
    extra = (splits[..., :, None] + offsets).reshape(splits.shape[:-1] + (-1,))
    edges = np.concatenate([np.broadcast_to(base, splits.shape[:-1] + base.shape), extra], axis=-1)
    return np.sort(np.clip(edges, lo, hi), axis=-1)
