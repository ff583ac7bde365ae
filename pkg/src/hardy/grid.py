"""Intervals with endpoint metadata and functions tabulated on graded grids.

Singular or infinite endpoints are never touched directly: every grid lives
strictly inside its interval between two cutoffs, and log grading clusters
nodes geometrically toward the indicated endpoint(s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

__all__ = ["Interval", "GridFunction", "make_grid", "sample", "GridError"]

ENDPOINT_KINDS = ("regular", "singular", "infinite")
GRADINGS = ("uniform", "log-left", "log-right", "log-both")


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    """Open interval (a, b), -inf <= a < b <= inf, with endpoint kind tags."""

    a: float
    b: float
    left_kind: str = "regular"
    right_kind: str = "regular"

    def __post_init__(self):
        if not self.a < self.b:
            raise GridError(f"need a < b, got ({self.a}, {self.b})")
        for kind, end in ((self.left_kind, self.a), (self.right_kind, self.b)):
            if kind not in ENDPOINT_KINDS:
                raise GridError(f"unknown endpoint kind {kind!r}")
            if math.isinf(end) != (kind == "infinite"):
                raise GridError(f"endpoint {end} inconsistent with kind {kind!r}")

    @staticmethod
    def half_line() -> "Interval":
        """(0, inf) with a singular origin, the home of the classical weight."""
        return Interval(0.0, math.inf, "singular", "infinite")

    @staticmethod
    def bounded(b: float, left_kind="singular", right_kind="singular") -> "Interval":
        return Interval(0.0, float(b), left_kind, right_kind)

    def contains(self, t) -> bool:
        return self.a < t < self.b

    @property
    def reference_point(self) -> float:
        """Interior normalization point: 1 on (0, inf), else the midpoint
        (geometric for intervals hugging 0, arithmetic otherwise)."""
        if self.a == 0.0 and math.isinf(self.b):
            return 1.0
        if math.isinf(self.a) and math.isinf(self.b):
            return 0.0
        if math.isinf(self.b):
            return self.a + 1.0
        if math.isinf(self.a):
            return self.b - 1.0
        if self.a == 0.0:
            return self.b / 2.0
        return 0.5 * (self.a + self.b)


def make_grid(iv: Interval, inner_cutoffs, n: int, grading: str = "uniform") -> np.ndarray:
    """Return ``n`` strictly increasing nodes between the cutoffs.

    ``grading`` clusters nodes geometrically toward the left endpoint,
    the right endpoint, or both; infinite endpoints are automatically
    geometric (uniform in log of the distance scale).
    """
    lo, hi = float(inner_cutoffs[0]), float(inner_cutoffs[1])
    if not (iv.a < lo < hi < iv.b):
        raise GridError(f"cutoffs ({lo}, {hi}) not strictly inside ({iv.a}, {iv.b})")
    if n < 16:
        raise GridError(f"need n >= 16 nodes, got {n}")
    if grading not in GRADINGS:
        raise GridError(f"unknown grading {grading!r}")

    if grading == "uniform":
        return np.linspace(lo, hi, n)

    if grading == "log-left":
        return _graded_toward(iv.a, lo, hi, n)
    if grading == "log-right":
        return _graded_toward(iv.b, hi, lo, n)[::-1].copy()

    # log-both
    if math.isinf(iv.a) or math.isinf(iv.b):
        if iv.a == 0.0 and math.isinf(iv.b):
            # pure geometric progression: symmetric in log scale
            return np.geomspace(lo, hi, n)
        return np.linspace(lo, hi, n)
    # smooth double-sided clustering: uniform in log((x-a)/(b-x)), which is
    # geometric toward both endpoints without a spacing jump in the middle
    y_lo = math.log((lo - iv.a) / (iv.b - lo))
    y_hi = math.log((hi - iv.a) / (iv.b - hi))
    y = np.linspace(y_lo, y_hi, n)
    ey = np.exp(y)
    nodes = (iv.a + iv.b * ey) / (1.0 + ey)
    nodes[0], nodes[-1] = lo, hi
    return nodes


def _graded_toward(endpoint, near, far, n):
    """Nodes from ``near`` to ``far`` clustering geometrically toward
    ``endpoint`` (which lies beyond ``near``)."""
    if math.isinf(endpoint):
        sgn = 1.0 if endpoint > 0 else -1.0
        a, b = sgn * near, sgn * far
        if a > 0 and b > 0:
            return sgn * np.geomspace(a, b, n)
        # straddles 0 on the way to the endpoint: fall back to uniform
        return np.linspace(near, far, n)
    d0, d1 = abs(near - endpoint), abs(far - endpoint)
    dist = np.geomspace(d0, d1, n)
    sgn = 1.0 if far > endpoint else -1.0
    return endpoint + sgn * dist


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Function tabulated on strictly increasing nodes.

    When derivative values are present, evaluation between nodes uses the
    cubic Hermite interpolant (exact at nodes); otherwise piecewise linear.
    """

    nodes: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray | None = None
    left_kind: str = "regular"
    right_kind: str = "regular"
    _spline: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        if nodes.ndim != 1 or nodes.size < 2:
            raise GridError("need at least two nodes")
        if not np.all(np.diff(nodes) > 0):
            raise GridError("nodes must be strictly increasing")
        if values.shape != nodes.shape:
            raise GridError("values shape mismatch")
        if not np.all(np.isfinite(values)):
            raise GridError("non-finite values on grid")
        if self.derivatives is not None:
            d = np.asarray(self.derivatives, dtype=float)
            object.__setattr__(self, "derivatives", d)
            if d.shape != nodes.shape or not np.all(np.isfinite(d)):
                raise GridError("derivative data must be finite and node-aligned")
            object.__setattr__(self, "_spline",
                               CubicHermiteSpline(nodes, values, d))

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        tol_lo = 1e-12 * (1.0 + abs(self.nodes[0]))
        tol_hi = 1e-12 * (1.0 + abs(self.nodes[-1]))
        if np.any(t_arr < self.nodes[0] - tol_lo) or np.any(t_arr > self.nodes[-1] + tol_hi):
            raise GridError(
                f"evaluation outside tabulated hull [{self.a}, {self.b}]")
        if self._spline is not None:
            out = self._spline(t_arr)
        else:
            out = np.interp(t_arr, self.nodes, self.values)
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def derivative(self, t):
        """First derivative of the interpolant (requires derivative data)."""
        if self._spline is None:
            raise GridError("no derivative data stored")
        t_arr = np.asarray(t, dtype=float)
        out = self._spline.derivative()(t_arr)
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def restrict(self, lo, hi) -> "GridFunction":
        mask = (self.nodes >= lo) & (self.nodes <= hi)
        if mask.sum() < 2:
            raise GridError("restriction leaves fewer than two nodes")
        return GridFunction(
            self.nodes[mask], self.values[mask],
            None if self.derivatives is None else self.derivatives[mask],
            self.left_kind, self.right_kind)

    def scaled(self, factor) -> "GridFunction":
        return GridFunction(
            self.nodes, self.values * factor,
            None if self.derivatives is None else self.derivatives * factor,
            self.left_kind, self.right_kind)

    def normalized_at(self, c) -> "GridFunction":
        """Scale so the interpolated value at ``c`` is 1."""
        v = self(c)
        if v == 0.0:
            raise GridError(f"cannot normalize: value vanishes at {c}")
        return self.scaled(1.0 / v)

    def positivity_domain(self) -> tuple[float, float]:
        """Largest node span around the midpoint node on which values > 0."""
        pos = self.values > 0
        i = self.nodes.size // 2
        if not pos[i]:
            raise GridError("function not positive at central node")
        lo = i
        while lo > 0 and pos[lo - 1]:
            lo -= 1
        hi = i
        while hi < self.nodes.size - 1 and pos[hi + 1]:
            hi += 1
        return float(self.nodes[lo]), float(self.nodes[hi])


def sample(f, nodes, deriv=None, left_kind="regular", right_kind="regular") -> GridFunction:
    """Tabulate a callable on ``nodes`` (with optional derivative callable)."""
    nodes = np.asarray(nodes, dtype=float)
    vals = _vector_eval(f, nodes)
    ders = None if deriv is None else _vector_eval(deriv, nodes)
    return GridFunction(nodes, vals, ders, left_kind, right_kind)


def _vector_eval(f, x):
    try:
        out = np.asarray(f(x), dtype=float)
        if out.shape == x.shape:
            return out
    except Exception:
        pass
    return np.array([float(f(xi)) for xi in x])
