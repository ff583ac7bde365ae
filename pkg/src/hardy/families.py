"""One-dimensional Hardy-weight families and their ground states.

A weight/ground-state pair (w, f) always satisfies (L - w) f = 0 for the
Schrodinger operator L = -d^2/dt^2 + q.  Families built here:

* the classical pair w = 1/(4 t^2), f = sqrt(2 t) on (0, inf);
* the improved closed-form family w = (2t - a t^2)^-2, f = sqrt(2t - a t^2)
  on (0, 2/a), together with its oscillating generalized eigenfunctions;
* general positive solutions of the Ermakov-Pinney equation
  -y'' + q y = k / y^3, built algebraically from a Wronskian-normalized
  solution pair, and the weights k / y^4 they generate;
* iterated weight series: each ground state seeds the next operator,
  producing strictly increasing partial sums of positive weights, with the
  closed-form recursion available for the harmonic (q = 0) case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from .grid import GridFunction, GridError, Interval, make_grid, sample
from .sturm import (SLProblem, SolutionPair, CoefficientError,
                    apply_operator, reduction_of_order, principal_solution)

__all__ = [
    "EPFamily", "WeightFamily1D", "SeriesResult", "Eigenfunction",
    "ep_solution", "ep_weight", "classical_family", "improved_family",
    "external_family", "improved_eigenfunction", "liouville_transform",
    "weight_series", "series_weight_closed_form", "SeriesClosedForm",
    "family_residual",
]

RESIDUAL_TOL = 1e-6
K_CONSTRAINT_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class EPFamily:
    """Ermakov-Pinney data: solution pair and mixing coefficients with
    c3^2 - c1 c2 = k > 0."""

    pair: SolutionPair
    c1: float
    c2: float
    c3: float
    k: float = 1.0

    def __post_init__(self):
        k_implied = self.c3 ** 2 - self.c1 * self.c2
        if self.k <= 0:
            raise CoefficientError(f"k must be positive, got {self.k}")
        if abs(k_implied - self.k) > K_CONSTRAINT_RTOL * max(1.0, abs(self.k)):
            raise CoefficientError(
                f"coefficient constraint violated: c3^2 - c1 c2 = {k_implied!r}, "
                f"declared k = {self.k!r}")
        if abs(abs(self.pair.wronskian) - 1.0) > 1e-6:
            raise CoefficientError(
                f"pair Wronskian must be normalized to +-1, got {self.pair.wronskian}")


@dataclass(frozen=True, eq=False)
class WeightFamily1D:
    """A weight w >= 0 with associated positive solution f of (L - w) f = 0.

    ``w`` is an evaluator valid on ``iv``; ``f_w`` is the tabulated ground
    state candidate.  Closed-form families also attach analytic f, f', f''
    so that residual checks are not limited by finite differences.
    """

    w: object
    f_w: GridFunction
    provenance: str
    iv: Interval
    f_fn: object = None
    f_prime_fn: object = None
    f_pp_fn: object = None
    k: float = 1.0
    params: dict = field(default_factory=dict)

    def f_eval(self, t):
        if self.f_fn is not None:
            return _broadcast(self.f_fn, t)
        return self.f_w(t)

    def f_deriv(self, t):
        if self.f_prime_fn is not None:
            return _broadcast(self.f_prime_fn, t)
        return self.f_w.derivative(t)

    def pointwise_residual(self, t, q=None):
        """-f'' + q f - w f at ``t`` from analytic derivatives when available."""
        if self.f_pp_fn is None:
            raise GridError("no analytic second derivative attached")
        t = np.asarray(t, dtype=float)
        qv = _broadcast(q, t) if q is not None else 0.0
        return (-_broadcast(self.f_pp_fn, t) + qv * self.f_eval(t)
                - _broadcast(self.w, t) * self.f_eval(t))


def _broadcast(f, t):
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return float(f(float(t)))
    try:
        out = np.asarray(f(t), dtype=float)
        if out.shape == t.shape:
            return out
    except Exception:
        pass
    return np.array([float(f(x)) for x in t])


def family_residual(prob: SLProblem, fam: WeightFamily1D) -> float:
    """sup |(L - w) f| / (1 + sup |w f|) over the interior of f's grid
    (the scale also admits |q f| when the potential dominates)."""
    lf = apply_operator(prob, fam.f_w)
    x = lf.nodes
    wf = _broadcast(fam.w, x) * fam.f_w(x)
    qf = np.array([float(prob.q(t)) for t in x]) * fam.f_w(x)
    resid = np.abs(lf.values - wf)
    scale = 1.0 + max(float(np.max(np.abs(wf))), float(np.max(np.abs(qf))))
    return float(np.max(resid) / scale)


# --- Ermakov-Pinney construction -------------------------------------------

def ep_solution(fam: EPFamily, prob: SLProblem | None = None,
                ref: float | None = None) -> GridFunction:
    """Positive solution f = sqrt|c1 v1^2 + c2 v2^2 + 2 c3 v1 v2| of
    -f'' + q f = k / f^3, restricted to the largest subinterval around the
    reference point on which the radicand stays away from zero (isolated
    zeros are excluded, shrinking the domain by one grid cell).
    """
    v1, v2 = fam.pair.v1, fam.pair.v2
    lo = max(v1.a, v2.a)
    hi = min(v1.b, v2.b)
    nodes = v2.nodes[(v2.nodes >= lo) & (v2.nodes <= hi)]
    if nodes.size < 5:
        raise GridError("solution pair grids barely overlap")
    a1 = v1(nodes); a2 = v2(nodes)
    d1 = v1.derivative(nodes); d2 = v2.derivative(nodes)
    radicand = fam.c1 * a1 ** 2 + fam.c2 * a2 ** 2 + 2 * fam.c3 * a1 * a2
    scale = float(np.max(np.abs(radicand)))
    if scale == 0.0:
        raise CoefficientError("radicand vanishes identically")

    if ref is None:
        ref = prob.reference_point if prob is not None else float(nodes[nodes.size // 2])
    i_ref = int(np.argmin(np.abs(nodes - ref)))
    alive = np.abs(radicand) > 1e-13 * scale
    if not alive[i_ref]:
        raise CoefficientError(f"radicand vanishes at the reference point {ref}")
    lo_i = i_ref
    while lo_i > 0 and alive[lo_i - 1] and radicand[lo_i - 1] * radicand[i_ref] > 0:
        lo_i -= 1
    hi_i = i_ref
    while hi_i < nodes.size - 1 and alive[hi_i + 1] and radicand[hi_i + 1] * radicand[i_ref] > 0:
        hi_i += 1
    # shrink by one cell on any side that actually hit a zero
    if lo_i > 0:
        lo_i += 1
    if hi_i < nodes.size - 1:
        hi_i -= 1
    if hi_i - lo_i < 4:
        raise CoefficientError("zero-free subinterval around the reference point too small")

    sel = slice(lo_i, hi_i + 1)
    rad = radicand[sel]
    drad = (2 * fam.c1 * a1 * d1 + 2 * fam.c2 * a2 * d2
            + 2 * fam.c3 * (d1 * a2 + a1 * d2))[sel]
    f_vals = np.sqrt(np.abs(rad))
    f_ders = np.sign(rad) * drad / (2.0 * f_vals)
    f = GridFunction(nodes[sel], f_vals, f_ders, v1.left_kind, v1.right_kind)

    if prob is not None:
        _check_ep_residual(prob, fam, f, nodes[sel],
                           (a1[sel], a2[sel], d1[sel], d2[sel]), rad, drad)
    return f


def _check_ep_residual(prob, fam, f, x, pair_data, rad, drad):
    """Verify -f'' + q f = k / f^3 two ways.

    The primary check evaluates f'' from the radicand algebra, using
    v_i'' = q v_i, which is exact up to the accuracy of the stored solution
    data (no finite differences, so no roundoff amplification at tight grid
    spacings).  A finite-difference cross-check of the assembled operator
    runs on the subset of nodes where the FD noise floor is comfortably
    below the tolerance.
    """
    a1, a2, d1, d2 = pair_data
    q = np.array([float(prob.q(t)) for t in x])
    rhs = fam.k / f.values ** 3
    qf = q * f.values
    tol = RESIDUAL_TOL * (1.0 + max(float(np.max(np.abs(rhs))),
                                    float(np.max(np.abs(qf)))))

    # R'' = 2 (c1 v1'^2 + c2 v2'^2 + 2 c3 v1' v2') + 2 q R
    d2rad = 2.0 * (fam.c1 * d1 ** 2 + fam.c2 * d2 ** 2
                   + 2.0 * fam.c3 * d1 * d2) + 2.0 * q * rad
    fpp = (2.0 * rad * d2rad - drad ** 2) / (4.0 * np.abs(rad) ** 1.5) \
        * np.sign(rad)
    resid_alg = np.abs(-fpp + qf - rhs)
    err = float(np.max(resid_alg))
    if err > tol:
        raise CoefficientError(
            f"Ermakov-Pinney residual {err:.3e} exceeds tolerance {tol:.3e}")

    lf = apply_operator(prob, f)
    h = np.minimum(np.diff(f.nodes)[:-1], np.diff(f.nodes)[1:])
    g = np.abs(f.derivatives[1:-1])
    floor = (200 * np.finfo(float).eps * g
             + 1e-10 * float(np.max(np.abs(f.values)))) / h
    trust = floor <= 0.1 * tol
    if np.any(trust):
        resid_fd = np.abs(lf.values - rhs[1:-1])
        err_fd = float(np.max(resid_fd[trust]))
        if err_fd > tol:
            raise CoefficientError(
                f"finite-difference Ermakov-Pinney residual {err_fd:.3e} "
                f"exceeds tolerance {tol:.3e}")


def ep_weight(f: GridFunction, k: float = 1.0,
              iv: Interval | None = None) -> WeightFamily1D:
    """Package w = k / f^4 with f as its ground-state candidate."""
    if np.any(f.values <= 0.0):
        raise CoefficientError("f must be positive on its domain")
    if k <= 0:
        raise CoefficientError("k must be positive")

    def w(t):
        return k / f(t) ** 4

    if iv is None:
        iv = Interval(f.a - 1e-12 * (1 + abs(f.a)), f.b + 1e-12 * (1 + abs(f.b)),
                      "regular", "regular")
    return WeightFamily1D(w=w, f_w=f, provenance="ep", iv=iv, k=k,
                          params={"strictly_positive": True})


# --- closed-form families ---------------------------------------------------

def classical_family(grid_span=(1e-8, 1e8), n=2401) -> WeightFamily1D:
    """w = 1/(4 t^2) with ground state sqrt(2 t) on (0, inf)."""
    iv = Interval.half_line()
    nodes = np.geomspace(grid_span[0], grid_span[1], n)
    f = GridFunction(nodes, np.sqrt(2 * nodes), 1.0 / np.sqrt(2 * nodes),
                     "singular", "infinite")
    return WeightFamily1D(
        w=lambda t: 1.0 / (4.0 * t ** 2),
        f_w=f, provenance="classical", iv=iv,
        f_fn=lambda t: np.sqrt(2.0 * t),
        f_prime_fn=lambda t: 1.0 / np.sqrt(2.0 * t),
        f_pp_fn=lambda t: -(2.0 * t) ** -1.5)


def improved_family(a: float, rel_margin=1e-6, n=2401) -> WeightFamily1D:
    """w = (2t - a t^2)^-2 with ground state sqrt(2t - a t^2) on (0, 2/a).

    The identity -f'' = w f holds exactly; a <= 0 is rejected because those
    weights no longer dominate the classical one.
    """
    if a <= 0:
        raise CoefficientError(f"parameter a must be positive, got {a}")
    b = 2.0 / a
    iv = Interval(0.0, b, "singular", "singular")

    def g(t):
        return t * (2.0 - a * t)

    nodes = make_grid(iv, (b * rel_margin, b * (1 - rel_margin)), n, "log-both")
    vals = np.sqrt(g(nodes))
    ders = (1.0 - a * nodes) / vals
    f = GridFunction(nodes, vals, ders, "singular", "singular")
    return WeightFamily1D(
        w=lambda t: g(t) ** -2.0,
        f_w=f, provenance="a-family", iv=iv,
        f_fn=lambda t: np.sqrt(g(t)),
        f_prime_fn=lambda t: (1.0 - a * t) / np.sqrt(g(t)),
        f_pp_fn=lambda t: -g(t) ** -1.5,
        params={"a": a})


def external_family(w, f_fn, iv: Interval, f_prime_fn=None, f_pp_fn=None,
                    grid=None, n=2401) -> WeightFamily1D:
    """Wrap user-supplied (w, f) evaluators as a family on ``iv``."""
    if grid is None:
        lo = iv.a + 1e-6 * (iv.reference_point - iv.a) if math.isfinite(iv.a) else iv.reference_point - 10.0
        hi = iv.b - 1e-6 * (iv.b - iv.reference_point) if math.isfinite(iv.b) else iv.reference_point * 1e6
        grading = "log-both" if iv.a == 0.0 else "uniform"
        grid = make_grid(iv, (lo, hi), n, grading)
    f_grid = sample(f_fn, grid, deriv=f_prime_fn,
                    left_kind=iv.left_kind, right_kind=iv.right_kind)
    return WeightFamily1D(w=w, f_w=f_grid, provenance="external", iv=iv,
                          f_fn=f_fn, f_prime_fn=f_prime_fn, f_pp_fn=f_pp_fn)


# --- oscillating eigenfunctions of the improved family ----------------------

@dataclass(frozen=True, eq=False)
class Eigenfunction:
    """u(t) = sqrt(2t - a t^2) cos((xi/2) log(M t / (2 - a t))) on its window.

    Solves -u'' = (1 + xi^2) w u between the left window edge (where u
    vanishes) and t = 2/(M+a) (where u' = (M^2 - a^2)/(4M) u), staying under
    the envelope sqrt(2t - a t^2) pointwise.
    """

    a: float
    M: float
    xi: float
    grid: GridFunction

    @property
    def window(self):
        return (2.0 / (self.M * math.exp(math.pi / self.xi) + self.a),
                2.0 / (self.M + self.a))

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        return np.sqrt(t * (2.0 - self.a * t))

    def phase(self, t):
        t = np.asarray(t, dtype=float)
        return 0.5 * self.xi * np.log(self.M * t / (2.0 - self.a * t))

    def __call__(self, t):
        return self.envelope(t) * np.cos(self.phase(t))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        g = t * (2.0 - self.a * t)
        th = self.phase(t)
        return ((1.0 - self.a * t) / np.sqrt(g) * np.cos(th)
                - self.xi / np.sqrt(g) * np.sin(th))

    def second_derivative(self, t):
        t = np.asarray(t, dtype=float)
        g = t * (2.0 - self.a * t)
        gp = 2.0 - 2.0 * self.a * t
        th = self.phase(t)
        f = np.sqrt(g)
        fp = (1.0 - self.a * t) / f
        # f'' = -g^{-3/2}; theta' = xi/g; theta'' = -xi g'/g^2
        return (-g ** -1.5 * np.cos(th)
                - 2.0 * fp * (self.xi / g) * np.sin(th)
                - f * (-self.xi * gp / g ** 2) * np.sin(th)
                - f * (self.xi / g) ** 2 * np.cos(th))

    def residual(self, t):
        """-u'' - (1 + xi^2) w u with analytic derivatives (identically zero
        in exact arithmetic)."""
        t = np.asarray(t, dtype=float)
        w = (t * (2.0 - self.a * t)) ** -2.0
        return -self.second_derivative(t) - (1.0 + self.xi ** 2) * w * self(t)


def improved_eigenfunction(a: float, M: float, xi: float, n=1001) -> Eigenfunction:
    """Construct and verify the oscillating eigenfunction for parameters
    a, M, xi > 0 (eigenvalue 1 + xi^2 against the improved weight)."""
    if min(a, M, xi) <= 0:
        raise CoefficientError("a, M, xi must all be positive")
    t_left = 2.0 / (M * math.exp(math.pi / xi) + a)
    t_right = 2.0 / (M + a)
    nodes = np.linspace(t_left, t_right, n)
    g = nodes * (2.0 - a * nodes)
    theta = 0.5 * xi * np.log(M * nodes / (2.0 - a * nodes))
    vals = np.sqrt(g) * np.cos(theta)
    ders = ((1.0 - a * nodes) * np.cos(theta) - xi * np.sin(theta)) / np.sqrt(g)
    ef = Eigenfunction(a, M, xi, GridFunction(nodes, vals, ders))
    _verify_eigenfunction(ef)
    return ef


def _verify_eigenfunction(ef: Eigenfunction):
    t_left, t_right = ef.window
    interior = np.linspace(t_left, t_right, 2001)[1:-1]
    resid = float(np.max(np.abs(ef.residual(interior))))
    if resid > 1e-7:
        raise CoefficientError(f"eigenfunction residual {resid:.3e} > 1e-7")
    bc_right = abs(ef.derivative(t_right)
                   - (ef.M ** 2 - ef.a ** 2) / (4.0 * ef.M) * ef(t_right))
    if bc_right > 1e-9:
        raise CoefficientError(f"right boundary identity off by {bc_right:.3e}")
    if abs(ef(t_left)) > 1e-9:
        raise CoefficientError(f"left boundary value {ef(t_left):.3e} not zero")
    over = float(np.max(np.abs(ef(interior)) - ef.envelope(interior)))
    if over > 1e-12:
        raise CoefficientError("eigenfunction exceeds its envelope")


# --- Liouville normal form ---------------------------------------------------

def liouville_transform(rho, iv: Interval, cutoffs=None, n=4001,
                        grading="uniform"):
    """Map -y'' - rho y = xi^2 rho y to -v'' + q_hat v = xi^2 v.

    Returns (s_map, q_hat) as grid functions: s(t) = integral_alpha^t
    sqrt(rho), with alpha the left cutoff, and
    q_hat = -1 + (1/(4 rho)) [ (rho'/rho)' - (rho'/rho)^2 / 4 ],
    derivatives taken numerically (4th order on uniform grids).
    q_hat vanishes identically exactly when rho^{-1/4} solves the
    Ermakov-Pinney equation -v'' = 1/v^3.
    """
    if cutoffs is None:
        ref = iv.reference_point
        lo = iv.a + 0.02 * (ref - iv.a) if math.isfinite(iv.a) else ref - 10
        hi = iv.b - 0.02 * (iv.b - ref) if math.isfinite(iv.b) else ref + 10
        cutoffs = (lo, hi)
    lo, hi = float(cutoffs[0]), float(cutoffs[1])
    # widen the grid a few cells so the twice-differentiated potential still
    # covers the requested window after interior trimming
    h0 = (hi - lo) / max(n - 1, 1)
    lo_ext = max(lo - 3 * h0, lo - 0.5 * (lo - iv.a)) if math.isfinite(iv.a) else lo - 3 * h0
    hi_ext = min(hi + 3 * h0, hi + 0.5 * (iv.b - hi)) if math.isfinite(iv.b) else hi + 3 * h0
    x = make_grid(iv, (lo_ext, hi_ext), n + 6, grading)
    rho_v = _broadcast(rho, x)
    if np.any(rho_v <= 0):
        raise CoefficientError("rho must be positive on the grid")

    from .sturm import sample_derivative
    log_rho = np.log(rho_v)
    dlr = sample_derivative(x, log_rho)            # rho'/rho on x[1:-1]
    d2lr = sample_derivative(x[1:-1], dlr)         # (rho'/rho)' on x[2:-2]
    core = slice(2, -2)
    q_hat_v = -1.0 + (d2lr - 0.25 * dlr[1:-1] ** 2) / (4.0 * rho_v[core])
    q_hat = GridFunction(x[core], q_hat_v)

    sqrt_rho = np.sqrt(rho_v)
    s_vals = np.empty_like(x)
    s_vals[0] = 0.0
    for i in range(x.size - 1):
        seg, _ = scipy.integrate.quad(lambda s: math.sqrt(float(rho(s))),
                                      x[i], x[i + 1], epsabs=1e-13, epsrel=1e-11)
        s_vals[i + 1] = s_vals[i] + seg
    s_vals -= float(np.interp(lo, x, s_vals))   # anchor s(lo) = 0
    s_map = GridFunction(x, s_vals, sqrt_rho)
    return s_map, q_hat


# --- iterated weight series ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class SeriesResult:
    weights: list          # WeightFamily1D, provenance "series(j)"
    cumulative: list       # GridFunction partial sums on the final window
    solution: GridFunction  # ground state candidate of the last operator
    anchors: list
    windows: list          # (0, right) construction window per step
    alphas: list
    betas: list


def weight_series(prob: SLProblem, m: float, coeffs, depth: int, *,
                  alphas=None, betas=None, anchor_policy="shrinking",
                  start_pair: SolutionPair | None = None,
                  left_cutoff=None, grid_n=1600) -> SeriesResult:
    """Iterate the Ermakov-Pinney construction: each ground state y_j gives
    a weight w_j = 1/y_j^4, the operator shrinks by w_j, and y_j seeds the
    next solution pair.  Partial sums of the w_j are strictly increasing
    positive weights on (0, m).

    ``anchor_policy`` is "shrinking" (companion anchors m+1-eps_j with
    eps_j = eps_{j-1} + 2^-j) or "fixed" (always m+1, the closed-form
    recursion's convention).  y_j itself is the minimal-growth solution of
    the shrunk operator at 0 - its reciprocal-square integral diverges
    there - so no extra limit computation is needed inside the loop.
    """
    if depth < 1:
        raise CoefficientError("depth must be >= 1")
    coeffs = _normalize_coeffs(coeffs, depth)
    alphas = list(alphas) if alphas is not None else [1.0] * depth
    betas = list(betas) if betas is not None else [1.0] * depth
    if len(alphas) < depth or len(betas) < depth:
        raise CoefficientError("need one alpha/beta per step")
    if any(b <= 0 for b in betas) or any(a < 0 for a in alphas):
        raise CoefficientError("need alpha >= 0 and beta > 0")
    if anchor_policy not in ("shrinking", "fixed"):
        raise CoefficientError(f"unknown anchor policy {anchor_policy!r}")
    _require_unit_p(prob)

    top = m + 1.0
    if left_cutoff is None:
        left_cutoff = 1e-4 * top
    master = np.geomspace(left_cutoff, top * (1.0 - 1e-9), grid_n)

    _check_nonoscillatory(prob, left_cutoff, top)

    anchors_used = []
    windows = []
    q_current = prob.q
    eps = 0.0

    if start_pair is None:
        pr = principal_solution(prob, "left", probe=master)
        v1 = pr.solution
        v = reduction_of_order(prob, v1, v1.b)
        v2 = _combine(v1, v, alphas[0], betas[0], prob)
        pair = SolutionPair(v1, v2, wronskian=betas[0])
    else:
        pair = start_pair

    weights = []
    y = None
    for j in range(1, depth + 1):
        c1, c2, c3 = coeffs[j - 1]
        fam = EPFamily(_rescale_pair(pair), c1, c2, c3, k=1.0)
        sub = SLProblem(prob.p, q_current, prob.iv)
        y = ep_solution(fam, prob=sub)
        window_hi = top - eps
        y = y.restrict(y.a, min(y.b, window_hi))

        yj = y  # bind for the closure

        def w_j(t, yj=yj):
            return yj(t) ** -4.0

        iv_j = Interval(0.0, window_hi, "singular", "regular")
        weights.append(WeightFamily1D(
            w=w_j, f_w=y, provenance=f"series({j})", iv=iv_j,
            params={"step": j, "window": (0.0, window_hi)}))
        windows.append((0.0, window_hi))

        if j == depth:
            break

        # shrink the operator and rebuild the companion pair from y_j
        q_prev = q_current

        def q_next(t, q_prev=q_prev, yj=yj):
            return q_prev(t) - yj(t) ** -4.0

        q_current = q_next
        eps = eps + 0.5 ** j if anchor_policy == "shrinking" else 0.0
        anchor = (top - eps) if anchor_policy == "shrinking" else top
        anchor = min(anchor, y.b) * (1 - 1e-12)
        anchors_used.append(anchor)
        sub_next = SLProblem(prob.p, q_current, prob.iv)
        v = reduction_of_order(sub_next, y, anchor)
        v2 = _combine(y, v, alphas[j], betas[j], sub_next)
        pair = SolutionPair(y.restrict(y.a, anchor), v2, wronskian=betas[j])

    lo_all = max(fam.f_w.a for fam in weights)
    hi_all = min(min(fam.f_w.b for fam in weights), windows[-1][1])
    keep = (master >= lo_all) & (master <= hi_all)
    cum_nodes = master[keep]
    cumulative = []
    acc = np.zeros(cum_nodes.size)
    for fam in weights:
        acc = acc + fam.f_w(cum_nodes) ** -4.0
        cumulative.append(GridFunction(cum_nodes, acc.copy()))
    return SeriesResult(weights, cumulative, y, anchors_used, windows,
                        alphas[:depth], betas[:depth])


def _normalize_coeffs(coeffs, depth):
    coeffs = list(coeffs)
    if coeffs and isinstance(coeffs[0], (int, float)):
        coeffs = [tuple(coeffs)]
    if len(coeffs) == 1:
        coeffs = coeffs * depth
    if len(coeffs) < depth:
        raise CoefficientError(f"need {depth} coefficient triples, got {len(coeffs)}")
    out = []
    for (c1, c2, c3) in coeffs[:depth]:
        if c1 <= 0 or c2 < 0 or c3 <= 0:
            raise CoefficientError(
                f"need c1 > 0, c2 >= 0, c3 > 0 in ({c1}, {c2}, {c3})")
        if abs(c3 ** 2 - c1 * c2 - 1.0) > K_CONSTRAINT_RTOL:
            raise CoefficientError(
                f"constraint c3^2 - c1 c2 = 1 violated by ({c1}, {c2}, {c3})")
        out.append((float(c1), float(c2), float(c3)))
    return out


def _require_unit_p(prob):
    for t in (prob.reference_point, prob.reference_point / 2):
        if abs(prob.p_at(t) - 1.0) > 1e-12:
            raise CoefficientError(
                "the series construction needs Schrodinger form (p = 1); "
                "reduce with liouville_transform first")


def _check_nonoscillatory(prob, lo, hi):
    from .ode import pruefer_zero_count
    zeros = pruefer_zero_count(prob.p, lambda t: -float(prob.q(t)),
                               lo, hi * (1 - 1e-9))
    if zeros > 0:
        raise CoefficientError(
            f"operator oscillates on ({lo}, {hi}): {zeros} zeros detected; "
            "nonnegativity precondition fails")


def _combine(v1, v, alpha, beta, prob):
    """alpha * v1 + beta * v on v's nodes, with derivative data."""
    nodes = v.nodes
    vals = alpha * v1(nodes) + beta * v.values
    ders = alpha * v1.derivative(nodes) + beta * v.derivatives
    return GridFunction(nodes, vals, ders, v.left_kind, v.right_kind)


def _rescale_pair(pair):
    """Scale the companion so the recorded p-Wronskian is exactly +-1."""
    wr = pair.wronskian
    if abs(abs(wr) - 1.0) < 1e-12:
        return pair
    return SolutionPair(pair.v1, pair.v2.scaled(1.0 / abs(wr)),
                        wronskian=math.copysign(1.0, wr))


# --- closed-form series recursion (harmonic case) ----------------------------

class SeriesClosedForm:
    """Truncated weight series for -y'' on (0, L) via the antiderivative
    recursion: G_0 = (L-t)/(2Lt), G_k = F(G_{k-1}) - F(0),
    F' (tau) = 1/(c1 + c2 tau^2 + 2 c3 tau), weight = sum (G_k')^2.

    With c1 = 1/L, c2 = 0 the first term is exactly the classical weight
    1/(4 t^2); for 0 < c1 <= 1/L and depth >= 2 the truncated sum dominates
    it strictly.
    """

    def __init__(self, L_len: float, c1: float, c2: float, depth: int):
        if L_len <= 0:
            raise CoefficientError("L must be positive")
        if c1 <= 0 or c2 < 0:
            raise CoefficientError("need c1 > 0 and c2 >= 0")
        if depth < 1:
            raise CoefficientError("depth must be >= 1")
        self.L = float(L_len)
        self.c1 = float(c1)
        self.c2 = float(c2)
        self.c3 = math.sqrt(1.0 + c1 * c2)
        self.depth = int(depth)

    def _F(self, tau):
        c1, c2, c3 = self.c1, self.c2, self.c3
        if c2 == 0.0:
            return np.log(c1 + 2.0 * c3 * tau) / (2.0 * c3)
        # c3^2 - c1 c2 = 1 forces distinct real roots
        r_hi = (-c3 + 1.0) / c2
        r_lo = (-c3 - 1.0) / c2
        return 0.5 * np.log((tau - r_hi) / (tau - r_lo))

    def _den(self, tau):
        return self.c1 + self.c2 * tau ** 2 + 2.0 * self.c3 * tau

    def g(self, k: int, t):
        """G_k(t) for 0 <= k <= depth."""
        t = np.asarray(t, dtype=float)
        cur = (self.L - t) / (2.0 * self.L * t)
        for _ in range(k):
            cur = self._F(cur) - self._F(0.0)
        return cur

    def g_prime(self, k: int, t):
        t = np.asarray(t, dtype=float)
        cur = (self.L - t) / (2.0 * self.L * t)
        der = -1.0 / (2.0 * t ** 2)
        for _ in range(k):
            der = der / self._den(cur)
            cur = self._F(cur) - self._F(0.0)
        return der

    def term(self, k: int, t):
        """k-th weight term (G_k')^2, k >= 1."""
        return self.g_prime(k, t) ** 2

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        cur = (self.L - t) / (2.0 * self.L * t)
        der = -1.0 / (2.0 * t ** 2)
        total = np.zeros_like(cur)
        for _ in range(self.depth):
            der = der / self._den(cur)
            cur = self._F(cur) - self._F(0.0)
            total = total + der ** 2
        return float(total) if total.ndim == 0 else total


def series_weight_closed_form(L_len: float, c1: float, c2: float,
                              depth: int) -> SeriesClosedForm:
    """Closed-form truncated series weight; see SeriesClosedForm."""
    return SeriesClosedForm(L_len, c1, c2, depth)
