"""Numerical toolkit for Lorentzian metrics of low (C1) regularity."""
from .geometry import (C0, C1, SMOOTH, Causal, ChartBox, ChartError, GeometryError, Metric, MetricField,
                       Orientation, ParameterError, Regularity, RegularityError, SingularMetricError,
                       TangentVector, VectorField, c1alpha, causal_character, euclid_norm, lorentzian_norm)
from .library import build, describe

__version__ = "0.1.0"
