"""Sturm-Liouville operators: application, Wronskians, principal solutions.

The operator is L(y) = -(p y')' + q y on an interval with p > 0.  All
positive solutions are handled projectively and normalized to 1 at the
interval's reference point.  Minimal-growth (principal) solutions at an
endpoint are computed by shooting from a nested sequence of anchors that
approach the endpoint; borderline (critical) operators converge only like
1/log(anchor), which is resolved by iterated Aitken extrapolation of the
shot sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from .grid import GridFunction, GridError, Interval
from .ode import solve_ivp, IntegrationError

__all__ = [
    "SLProblem", "SolutionPair", "PrincipalResult",
    "apply_operator", "reduction_of_order", "principal_solution",
    "sample_derivative", "CoefficientError", "ConvergenceError",
]

WRONSKIAN_RTOL = 1e-6


class CoefficientError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def _const(value):
    def f(t):
        return value
    f.is_constant = value
    return f


@dataclass(frozen=True)
class SLProblem:
    """L(y) = -(p y')' + q y on ``iv``; p > 0 is checked lazily at queried points."""

    p: object
    q: object
    iv: Interval

    def __post_init__(self):
        if not callable(self.p):
            object.__setattr__(self, "p", _const(float(self.p)))
        if not callable(self.q):
            object.__setattr__(self, "q", _const(float(self.q)))

    def p_at(self, t) -> float:
        v = float(self.p(t))
        if not v > 0.0:
            raise CoefficientError(f"p({t}) = {v} is not positive")
        return v

    @property
    def reference_point(self) -> float:
        return self.iv.reference_point

    def apply(self, f: GridFunction) -> GridFunction:
        return apply_operator(self, f)


@dataclass(frozen=True, eq=False)
class SolutionPair:
    """Two positive independent solutions with p-weighted Wronskian
    p (v1' v2 - v1 v2') constant (target 1)."""

    v1: GridFunction
    v2: GridFunction
    wronskian: float = 1.0


def wronskian_values(prob: SLProblem, v1: GridFunction, v2: GridFunction,
                     nodes=None) -> np.ndarray:
    """p (v1' v2 - v1 v2') sampled on common nodes (Abel: constant for solutions)."""
    if v1.derivatives is None or v2.derivatives is None:
        raise GridError("Wronskian needs derivative data on both factors")
    if nodes is None:
        lo = max(v1.a, v2.a)
        hi = min(v1.b, v2.b)
        nodes = v1.nodes[(v1.nodes >= lo) & (v1.nodes <= hi)]
    nodes = np.asarray(nodes, dtype=float)
    p = np.array([prob.p_at(t) for t in nodes])
    return p * (v1.derivative(nodes) * v2(nodes) - v1(nodes) * v2.derivative(nodes))


def check_pair(prob: SLProblem, pair: SolutionPair, rtol=WRONSKIAN_RTOL) -> float:
    """Verify Abel conservation; returns the worst relative deviation."""
    w = wronskian_values(prob, pair.v1, pair.v2)
    scale = max(abs(pair.wronskian), 1e-300)
    dev = float(np.max(np.abs(w - pair.wronskian))) / scale
    if dev > rtol:
        raise CoefficientError(
            f"p-weighted Wronskian deviates by {dev:.3e} (tolerance {rtol:.1e})")
    return dev


# --- operator application -------------------------------------------------

def apply_operator(prob: SLProblem, f: GridFunction) -> GridFunction:
    """Evaluate -(p f')' + q f on the grid interior by centered differences.

    Uses stored derivative data when available (then only the outer
    derivative is numerical); 4th-order stencils on uniform grids,
    2nd-order otherwise.  The two boundary nodes are dropped.
    """
    x = f.nodes
    if x.size < 5:
        raise GridError("grid too coarse for operator application (need >= 5 nodes)")
    p = np.array([prob.p_at(t) for t in x])
    q = np.array([float(prob.q(t)) for t in x])

    if f.derivatives is not None:
        g = p * f.derivatives          # p f' exactly at nodes
        dg = sample_derivative(x, g)
    else:
        fp = sample_derivative(x, f.values, keep_ends=True)
        g = p * fp
        dg = sample_derivative(x, g)
    interior = slice(1, -1)
    out = -dg + q[interior] * f.values[interior]
    return GridFunction(x[interior], out)


def sample_derivative(x, y, keep_ends=False):
    """First derivative of samples y(x) at interior nodes (optionally padded
    with one-sided values at the two ends so the result aligns with x).

    Deep interior nodes use 5-point stencils with weights fitted to the
    local node positions (4th order on smoothly graded grids); the nodes
    adjacent to the ends fall back to the 3-point second-order stencil.
    """
    n = x.size
    d = np.empty(n)
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    denom = hm * hp * (hm + hp)
    d[1:-1] = (-hp**2 * y[:-2] + (hp**2 - hm**2) * y[1:-1] + hm**2 * y[2:]) / denom

    if n >= 7:
        d[1:-1] = _five_point_first_derivative(x, y)

    if keep_ends:
        d[0] = (y[1] - y[0]) / (x[1] - x[0])
        d[-1] = (y[-1] - y[-2]) / (x[-1] - x[-2])
        return d
    return d[1:-1]


def _five_point_first_derivative(x, y):
    """Batched polynomial-fit weights on 5-point neighborhoods of all
    interior nodes (stencils shift one step at the two near-boundary
    nodes)."""
    n = x.size
    idx = np.arange(1, n - 1)
    centers = np.clip(idx, 2, n - 3)
    cols = centers[:, None] + np.arange(-2, 3)[None, :]
    offsets = x[cols] - x[idx][:, None]
    h = np.max(np.abs(offsets), axis=1)
    dhat = offsets / h[:, None]
    powers = dhat[:, None, :] ** np.arange(5)[None, :, None]   # (N, 5, 5)
    rhs = np.zeros((idx.size, 5, 1))
    rhs[:, 1, 0] = 1.0
    weights = np.linalg.solve(powers, rhs)[:, :, 0] / h[:, None]
    return np.sum(weights * y[cols], axis=1)


# --- reduction of order ---------------------------------------------------

def reduction_of_order(prob: SLProblem, v1: GridFunction, anchor: float) -> GridFunction:
    """Second solution v(t) = v1(t) * integral_t^anchor ds / (p v1^2).

    v vanishes at the anchor, is positive to its left, and the p-weighted
    Wronskian p (v1' v - v1 v') equals 1 identically.  Segment integrals use
    adaptive Gauss-Kronrod quadrature on the interpolated v1.
    """
    if not (v1.a <= anchor <= v1.b):
        raise GridError(f"anchor {anchor} outside v1's tabulated hull")
    nodes = v1.nodes[v1.nodes < anchor]
    if nodes.size < 2:
        raise GridError("anchor leaves too few nodes to the left")
    vals1 = v1(nodes)
    if np.any(vals1 <= 0.0):
        raise CoefficientError("v1 must be positive left of the anchor")

    def integrand(s):
        return 1.0 / (prob.p_at(s) * v1(s) ** 2)

    pts = np.append(nodes, anchor)
    segments = np.empty(nodes.size)
    for i in range(nodes.size):
        val, _ = scipy.integrate.quad(integrand, pts[i], pts[i + 1],
                                      epsabs=1e-14, epsrel=1e-12, limit=200)
        segments[i] = val
    tail = np.cumsum(segments[::-1])[::-1]   # integral from nodes[i] to anchor

    d1 = v1.derivative(nodes)
    v_vals = vals1 * tail
    v_ders = d1 * tail - 1.0 / (np.array([prob.p_at(t) for t in nodes]) * vals1)
    va = float(v1(anchor))
    all_nodes = np.append(nodes, anchor)
    all_vals = np.append(v_vals, 0.0)
    all_ders = np.append(v_ders, -1.0 / (prob.p_at(anchor) * va))
    return GridFunction(all_nodes, all_vals, all_ders,
                        v1.left_kind, "regular")


# --- principal (minimal growth) solutions ----------------------------------

@dataclass(frozen=True, eq=False)
class PrincipalResult:
    solution: GridFunction
    converged_raw: bool          # successive shots met the sup-norm threshold
    accelerated: bool            # convergence declared on the Aitken table
    nestings: int
    growth_ratios: tuple = field(default=())  # u/h on three nested inner windows


def principal_solution(prob: SLProblem, endpoint: str, probe=None,
                       tol=1e-8, max_nestings=48, shrink=0.25) -> PrincipalResult:
    """Solution of minimal growth at ``endpoint`` ("left" or "right").

    Shoots y(anchor) = 0 from anchors approaching the endpoint toward the
    reference point and follows the projective coordinate m = (p y')/y
    there; the principal direction is its limit.  Exponentially separated
    solution pairs converge in a few nestings; borderline pairs (separated
    only by log factors) converge harmonically in log(anchor), which
    iterated Aitken extrapolation of the m-sequence resolves.  The result
    is normalized to 1 at the reference point and records minimal-growth
    ratio evidence u/h on three nested windows near the endpoint.
    """
    if endpoint not in ("left", "right"):
        raise ValueError("endpoint must be 'left' or 'right'")
    iv = prob.iv
    ref = iv.reference_point
    anchors = _anchor_sequence(iv, endpoint, ref, max_nestings, shrink)
    p_ref = prob.p_at(ref)

    # scale of the unit-slope basis solution on the default comparison window,
    # so the tolerance acts on the sup norm of normalized shots
    window = _comparison_window(iv, ref)
    basis2 = solve_ivp(prob.p, prob.q, None, 0.0, ref, 0.0, 1.0 / p_ref, window)
    m_scale = max(float(np.max(np.abs(basis2.values))), 1e-6)

    endpoint_value = iv.a if endpoint == "left" else iv.b
    slopes = []
    inv_logs = []                # 1 / |log distance to endpoint|
    used_anchors = []
    converged_raw = False
    extrapolated = None
    for tau in anchors:
        yp0 = 1.0 if endpoint == "left" else -1.0
        try:
            _, vals, ders = _staged_shot(prob, tau, yp0, [ref])
        except (IntegrationError, CoefficientError) as exc:
            if not slopes:
                raise ConvergenceError(f"first shot failed: {exc}") from exc
            break
        y_ref, yp_ref = vals[0], ders[0]
        if y_ref <= 0.0:
            raise ConvergenceError(
                "shot changed sign before the reference point: "
                "operator oscillatory toward the endpoint")
        m = p_ref * yp_ref / y_ref
        if not math.isfinite(m):
            break
        slopes.append(m)
        dist = abs(tau - endpoint_value) if math.isfinite(endpoint_value) \
            else abs(tau)
        inv_logs.append(abs(math.log(dist)))   # holds L; filtered below
        used_anchors.append(tau)
        if len(slopes) >= 2 and abs(slopes[-1] - slopes[-2]) * m_scale < tol:
            converged_raw = True
            break
        # borderline pairs converge like 1/log(anchor); extrapolate to 0
        if len(slopes) >= 8:
            est, err = _extrapolate_slopes(inv_logs, slopes)
            if err * m_scale < 0.1 * tol:
                extrapolated = est
                break

    accelerated = False
    if converged_raw:
        m_limit = slopes[-1]
    elif extrapolated is not None:
        m_limit = extrapolated
        accelerated = True
    else:
        m_limit, err = _extrapolate_slopes(inv_logs, slopes)
        if err * m_scale >= tol:
            raise ConvergenceError(
                f"no convergence after {len(slopes)} nestings "
                "(raw and extrapolated slope sequences both above tolerance)")
        accelerated = True

    targets = _probe_nodes(probe, window)
    u = solve_ivp(prob.p, prob.q, None, 0.0, ref, 1.0, m_limit / p_ref, targets)
    ratios = _growth_ratios(prob, endpoint, used_anchors, ref)
    return PrincipalResult(u, converged_raw, accelerated,
                           len(slopes), tuple(ratios))


def _probe_nodes(probe, default):
    if probe is None:
        return default
    if isinstance(probe, GridFunction):
        return probe.nodes
    return np.asarray(probe, dtype=float)


def _comparison_window(iv, ref):
    if iv.a == 0.0 and math.isinf(iv.b):
        return np.geomspace(ref / 2, ref * 2, 33)
    lo = ref - 0.25 * (ref - iv.a) if math.isfinite(iv.a) else ref - 1.0
    hi = ref + 0.25 * (iv.b - ref) if math.isfinite(iv.b) else ref + 1.0
    return np.linspace(lo, hi, 33)


def _anchor_sequence(iv, endpoint, ref, max_nestings, shrink):
    if endpoint == "left":
        e = iv.a
        if math.isinf(e):
            return [ref - 2.0 * 2.0 ** j for j in range(max_nestings)]
        d0 = 0.5 * (ref - e)
        return [e + d0 * shrink ** j for j in range(max_nestings)]
    e = iv.b
    if math.isinf(e):
        return [ref + 2.0 * 2.0 ** j for j in range(max_nestings)]
    d0 = 0.5 * (e - ref)
    return [e - d0 * shrink ** j for j in range(max_nestings)]


def _staged_shot(prob, tau, yp_sign, targets):
    """Shot y(tau) = 0, p y' = yp_sign integrated in geometric stages with
    the state renormalized between stages.

    The equation is linear, so rescaling is exact; it keeps the state O(1)
    and the error control relative even when the solution spans hundreds of
    orders of magnitude (deep anchors near a singular endpoint).  Returns
    (targets, values, derivatives) scaled so max |value| = 1; positivity of
    the values is preserved for sign checks.
    """
    targets = np.sort(np.asarray(targets, dtype=float))
    forward = targets[-1] > tau
    far = targets[-1] if forward else targets[0]
    stops = _stage_points(tau, far)
    u = np.array([0.0, float(yp_sign)])
    out_vals = np.full(targets.size, np.nan)
    out_ders = np.full(targets.size, np.nan)
    log_scale = 0.0
    scales_log = np.zeros(targets.size)

    def rhs(t, u):
        return [u[1] / prob.p(t), prob.q(t) * u[0]]

    t_cur = tau
    at_start = np.isclose(targets, tau, rtol=1e-14, atol=0.0)
    out_vals[at_start] = 0.0
    out_ders[at_start] = yp_sign / prob.p_at(tau)
    for stop in stops:
        inside = (targets > t_cur) & (targets <= stop) if forward \
            else (targets < t_cur) & (targets >= stop)
        pts = targets[inside]
        t_eval = np.concatenate([pts if forward else pts[::-1], [stop]])
        t_eval = np.unique(t_eval) if forward else np.unique(t_eval)[::-1]
        sol = scipy.integrate.solve_ivp(
            rhs, (t_cur, stop), u, method="RK45", t_eval=t_eval,
            rtol=1e-11, atol=1e-14)
        if not sol.success:
            raise IntegrationError(f"staged shot failed: {sol.message}",
                                   last_t=sol.t[-1] if sol.t.size else t_cur)
        for k, te in enumerate(sol.t):
            sel = np.isclose(targets, te, rtol=1e-14, atol=0.0)
            if np.any(sel):
                out_vals[sel] = sol.y[0, k]
                out_ders[sel] = sol.y[1, k] / prob.p_at(te)
                scales_log[sel] = log_scale
        u = sol.y[:, -1].copy()
        norm = max(abs(u[0]), abs(u[1]))
        if norm == 0.0:
            raise IntegrationError("staged shot annihilated", last_t=stop)
        u /= norm
        log_scale += math.log(norm)
        t_cur = stop

    if np.any(np.isnan(out_vals)):
        raise IntegrationError("staged shot missed a target")
    # stitch stages to a common scale anchored at the largest log
    ref_log = float(np.max(scales_log))
    factor = np.exp(scales_log - ref_log)
    vals = out_vals * factor
    ders = out_ders * factor
    top = float(np.max(np.abs(vals)))
    if top > 0:
        vals = vals / top
        ders = ders / top
    return targets, vals, ders


def _stage_points(tau, far):
    """Geometric breakpoints from tau to far (either direction)."""
    if tau > 0 and far > 0:
        decades = abs(math.log10(far / tau))
        n = max(2, int(decades) + 1)
        return np.geomspace(tau, far, n + 1)[1:]
    span = far - tau
    return [tau + span * k / 8.0 for k in range(1, 9)]


def _extrapolate_slopes(log_dists, slopes):
    """Extrapolate the slope sequence to infinitely deep anchors using
    Neville in the variable 1/|log distance| (anchors too close to unit
    distance are skipped: their log coordinate degenerates)."""
    L = np.asarray(log_dists, dtype=float)
    m = np.asarray(slopes, dtype=float)
    mask = L > 0.75
    if mask.sum() < 4:
        return (float(m[-1]) if m.size else math.nan), math.inf
    return _extrapolate_zero(1.0 / L[mask], m[mask])


def _extrapolate_zero(x, y, max_points=24):
    """Neville extrapolation of y(x) to x = 0 with noise-floor detection.

    Intended for sequences with an asymptotic expansion in x = 1/log(d):
    the diagonal of the Neville table converges rapidly until integration
    noise takes over; the entry whose change from the previous diagonal
    entry is smallest wins.  Returns (limit, error estimate).
    """
    if y.size < 3:
        return (float(y[-1]) if y.size else math.nan), math.inf
    x = x[-max_points:].astype(float)
    y = y[-max_points:].astype(float)
    n = x.size
    tab = y.copy()
    diag = [tab[-1]]
    for k in range(1, n):
        # tab[i] becomes the degree-k interpolant through points i-k..i at 0
        new = np.empty(n - k)
        for i in range(k, n):
            denom = x[i] - x[i - k]
            if denom == 0.0:
                new[i - k] = tab[i - k + 1] if i - k + 1 < tab.size else tab[-1]
                continue
            new[i - k] = (x[i] * tab[i - k] - x[i - k] * tab[i - k + 1]) / denom
        tab = new
        diag.append(tab[-1])
    diag = np.array(diag)
    changes = np.abs(np.diff(diag))
    if changes.size == 0:
        return float(diag[-1]), math.inf
    best = int(np.argmin(changes))
    return float(diag[best + 1]), float(changes[best])


def _growth_ratios(prob, endpoint, anchors, ref):
    """u/h on three nested windows near the endpoint, where u is the deepest
    shot (stable when integrated away from the endpoint) and h its
    reduction-of-order companion anchored near the endpoint.  The common
    scale of u cancels in the trend; only the decrease toward the endpoint
    carries evidence."""
    if len(anchors) < 6:
        return []
    tau = anchors[-1]
    inner = anchors[-4:-1]      # three nested evaluation points
    anchor_h = anchors[-6]
    lo = min([anchor_h] + inner)
    hi = max([anchor_h] + inner)
    dense = np.geomspace(lo, hi, 600) if lo > 0 else np.linspace(lo, hi, 600)
    dense = np.unique(np.concatenate([dense, inner, [anchor_h]]))
    try:
        yp0 = 1.0 if endpoint == "left" else -1.0
        targets, vals, _ = _staged_shot(prob, tau, yp0, dense)
    except (IntegrationError, CoefficientError):
        return []
    if np.any(vals <= 0):
        return []
    p_vals = np.array([prob.p_at(t) for t in targets])
    integrand = 1.0 / (p_vals * vals ** 2)

    ratios = []
    for t in inner:
        if endpoint == "left":
            sel = (targets >= t) & (targets <= anchor_h)
        else:
            sel = (targets >= anchor_h) & (targets <= t)
        total = float(np.trapezoid(integrand[sel], targets[sel]))
        ratios.append(1.0 / total if total > 0 else math.inf)
    return ratios  # ordered outer -> inner; should decrease toward the endpoint
