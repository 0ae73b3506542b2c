"""Charts, metric fields, tangent vectors and causal classification.

Index layout used throughout the package: the derivative index comes first.
``dg[..., k, i, j]`` is the partial derivative of ``g_ij`` along coordinate
``k`` and ``ddg[..., l, k, i, j]`` the second derivative along ``l`` and
``k``.  Every evaluator accepts a batch of points of shape ``(..., n)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np


class GeometryError(Exception):
    """Base class for errors raised by the toolkit."""


class ChartError(GeometryError, ValueError):
    """A point lies outside the chart box (or its required margin)."""


class SingularMetricError(GeometryError, ArithmeticError):
    """The metric matrix is singular or has the wrong signature."""


class RegularityError(GeometryError):
    """An operation needs more derivatives than the metric provides."""


class ParameterError(GeometryError, ValueError):
    """A constructor or operation parameter is out of range."""


@dataclass(frozen=True)
class Regularity:
    kind: str
    alpha: float | None = None

    def __str__(self) -> str:
        if self.kind == "C1alpha":
            return f"C1,{self.alpha:g}"
        return self.kind

    @property
    def is_smooth(self) -> bool:
        return self.kind == "smooth"


SMOOTH = Regularity("smooth")
C1 = Regularity("C1")
C0 = Regularity("C0")


def c1alpha(alpha: float) -> Regularity:
    return Regularity("C1alpha", float(alpha))


class Causal(enum.Enum):
    TIMELIKE = "timelike"
    NULL = "null"
    SPACELIKE = "spacelike"
    ZERO = "zero"


class Orientation(enum.Enum):
    FUTURE = "future"
    PAST = "past"
    NONE = "none"


@dataclass(frozen=True)
class ChartBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ParameterError("chart corners must be vectors of equal length")
        if not 2 <= lo.size <= 4:
            raise ParameterError(f"chart dimension {lo.size} not in 2..4")
        if not np.all(lo < hi):
            raise ParameterError("chart lower corner must be below upper corner")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, n: int, half_width: float, center: Sequence[float] | None = None) -> ChartBox:
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        return cls(c - half_width, c + half_width)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x, margin: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower + margin) & (x <= self.upper - margin), axis=-1)

    def check(self, x, margin: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ChartError(f"point has {x.shape[-1]} coordinates, chart has {self.dim}")
        if not np.all(self.contains(x, margin)):
            raise ChartError(f"point outside chart box (margin {margin:g})")
        return x

    def shrink(self, margin: float) -> ChartBox:
        return ChartBox(self.lower + margin, self.upper - margin)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.lower + rng.random((count, self.dim)) * self.widths

    def grid(self, per_axis: int | Sequence[int]) -> np.ndarray:
        counts = np.broadcast_to(np.asarray(per_axis), (self.dim,))
        axes = [np.linspace(lo, hi, int(m)) for lo, hi, m in zip(self.lower, self.upper, counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def euclid_norm(self, v) -> np.ndarray:
        return np.linalg.norm(np.asarray(v, dtype=float), axis=-1)


def euclid_norm(v) -> float | np.ndarray:
    comps = v.components if isinstance(v, TangentVector) else np.asarray(v, dtype=float)
    return np.linalg.norm(comps, axis=-1)


class Metric:
    """Common interface of a Lorentzian metric on a chart box.

    Subclasses implement :meth:`jet`.  ``depends_on`` lists the coordinate
    axes the components actually vary along, which lets convolution and
    sampling routines reduce dimension.  ``breakpoints`` maps an axis to the
    coordinate values where the components lose smoothness.
    """

    name: str
    chart: ChartBox
    regularity: Regularity
    depends_on: tuple[int, ...]
    breakpoints: Mapping[int, tuple[float, ...]]
    time_axis: int = 0

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def max_order(self) -> int:
        return 1

    def jet(self, x, order: int = 1):
        raise NotImplementedError

    def metric(self, x) -> np.ndarray:
        return self.jet(x, 0)[0]

    def time_vector(self, x) -> np.ndarray:
        """Future-directed unit timelike vector along the time axis."""
        x = np.asarray(x, dtype=float)
        g = self.metric(x)
        gtt = g[..., self.time_axis, self.time_axis]
        if np.any(gtt >= 0):
            raise SingularMetricError("time axis is not timelike")
        t = np.zeros(x.shape)
        t[..., self.time_axis] = 1.0 / np.sqrt(-gtt)
        return t

    def inner(self, x, u, v) -> np.ndarray:
        g = self.metric(x)
        return np.einsum("...ij,...i,...j->...", g, np.asarray(u, float), np.asarray(v, float))


@dataclass(frozen=True, eq=False)
class MetricField(Metric):
    name: str
    chart: ChartBox
    components: Callable[[np.ndarray], np.ndarray]
    derivatives: Callable[[np.ndarray], np.ndarray]
    regularity: Regularity = SMOOTH
    second_derivatives: Callable[[np.ndarray], np.ndarray] | None = None
    depends_on: tuple[int, ...] | None = None
    breakpoints: Mapping[int, tuple[float, ...]] = field(default_factory=dict)
    params: Mapping[str, float] = field(default_factory=dict)
    time_axis: int = 0

    def __post_init__(self):
        if self.depends_on is None:
            object.__setattr__(self, "depends_on", tuple(range(self.chart.dim)))
        else:
            object.__setattr__(self, "depends_on", tuple(sorted(self.depends_on)))

    @property
    def max_order(self) -> int:
        return 2 if self.second_derivatives is not None else 1

    def jet(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        if order > self.max_order:
            raise RegularityError(f"{self.name} ({self.regularity}) provides no derivatives of order {order}")
        out = [self.components(x)]
        if order >= 1:
            out.append(self.derivatives(x))
        if order >= 2:
            out.append(self.second_derivatives(x))
        return tuple(out)

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}({args})"


@dataclass(frozen=True)
class TangentVector:
    point: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.point, dtype=float)
        v = np.asarray(self.components, dtype=float)
        if p.shape != v.shape or p.ndim != 1:
            raise ParameterError("base point and components must be vectors of equal length")
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "components", v)

    def scaled(self, s: float) -> TangentVector:
        return TangentVector(self.point, s * self.components)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Vector field ``x -> V^i(x)`` with optional Jacobian ``dV[..., j, i]``."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray] | None = None
    regularity: Regularity = C1
    # axes the field varies along; None means all of them
    depends_on: tuple[int, ...] | None = None

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(np.asarray(x, dtype=float))

    def jacobian(self, x) -> np.ndarray:
        if self.derivative is None:
            raise RegularityError("vector field carries no derivative data")
        return self.derivative(np.asarray(x, dtype=float))

    @classmethod
    def constant(cls, components) -> VectorField:
        c = np.asarray(components, dtype=float)
        n = c.size

        def value(x):
            return np.broadcast_to(c, x.shape[:-1] + (n,)).copy()

        def jac(x):
            return np.zeros(x.shape[:-1] + (n, n))

        return cls(value, jac, SMOOTH, ())


def lorentzian_norm(g: Metric, v: TangentVector) -> float:
    """Quadratic form ``g_ij v^i v^j`` (negative for timelike vectors)."""
    g.chart.check(v.point)
    return float(g.inner(v.point, v.components, v.components))


def causal_character(g: Metric, v: TangentVector, tol: float = 1e-12) -> tuple[Causal, Orientation]:
    g.chart.check(v.point)
    scale = float(np.dot(v.components, v.components))
    if scale == 0.0:
        return Causal.ZERO, Orientation.NONE
    q = float(g.inner(v.point, v.components, v.components))
    if q > tol * scale:
        return Causal.SPACELIKE, Orientation.NONE
    kind = Causal.NULL if abs(q) <= tol * scale else Causal.TIMELIKE
    tdot = float(g.inner(v.point, v.components, g.time_vector(v.point)))
    return kind, (Orientation.FUTURE if tdot < 0 else Orientation.PAST)


def check_lorentzian(g: Metric, x) -> np.ndarray:
    """Return the eigenvalues at ``x``; raise unless the signature is (-,+,...,+)."""
    gm = g.metric(x)
    if not np.allclose(gm, np.swapaxes(gm, -1, -2), atol=1e-13, rtol=1e-12):
        raise SingularMetricError("metric matrix not symmetric")
    ev = np.linalg.eigvalsh(gm)
    ok = (ev[..., 0] < 0) & (ev[..., 1] > 0)
    if not np.all(ok):
        raise SingularMetricError("metric is not Lorentzian at some sample")
    return ev


def inverse_metric(gm: np.ndarray) -> np.ndarray:
    det = np.linalg.det(gm)
    scale = np.prod(np.abs(np.diagonal(gm, axis1=-2, axis2=-1)), axis=-1) + 1e-300
    if np.any(np.abs(det) < 1e-14 * scale):
        raise SingularMetricError("singular metric matrix")
    return np.linalg.inv(gm)
