"""Radial reduction on R^n: Green potentials of -Laplace, pulled-back
Hardy weights, and the Rellich-type inequality check.

For a rotationally invariant density phi with compact support, the
potential solves the radial Poisson equation -(r^{n-1} G')' = r^{n-1} phi
with G -> 0 at infinity, and equals C r^{2-n} outside the support.  Every
one-dimensional weight/ground-state pair (w, f) pulls back to
W = |grad tau|^2 w(tau) + (f'/f)(tau) phi / u with tau = G/u, whose ground
state is u f(tau); the classical and improved families are special cases
with closed forms off the support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
from scipy.special import gamma

from .grid import GridFunction, Interval
from .sturm import SLProblem, apply_operator, CoefficientError
from .families import WeightFamily1D, classical_family, improved_family
from .certify import DivergenceVerdict, classify_improper_integral

__all__ = [
    "RadialProblem", "NDWeight", "AnnularBump",
    "unit_sphere_area", "green_potential", "make_radial_problem",
    "classical_weight", "pullback_weight", "improved_weight",
    "rellich_check", "null_criticality_integrals", "random_annular_bumps",
    "bump_density",
]

POISSON_RTOL = 1e-7
EXTERIOR_RTOL = 1e-8


def unit_sphere_area(n: int) -> float:
    """Area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / gamma(n / 2.0)


class _PotentialTables:
    """Cumulative moments of the density on a knot set reaching down to 0:
    A(r) = int_0^r phi s^{n-1} ds and B(r) = int_r^R phi s ds."""

    def __init__(self, n, phi, r_support, r_grid):
        interior = r_grid[r_grid < r_support]
        base = interior[0] if interior.size else r_support
        deep = np.geomspace(base * 1e-10, base, 41)[:-1]
        pts = np.unique(np.concatenate([[0.0], deep, interior, [r_support]]))
        self.pts = pts
        self.A_vals = _cumulative(lambda s: phi(s) * s ** (n - 1), pts)
        self.B_vals = _cumulative(lambda s: phi(s) * s, pts)
        self.mass = float(self.A_vals[-1])
        self.B_total = float(self.B_vals[-1])
        self.r_support = r_support

    def A(self, r):
        if r >= self.r_support:
            return self.mass
        return float(np.interp(r, self.pts, self.A_vals))

    def B(self, r):
        if r >= self.r_support:
            return 0.0
        return self.B_total - float(np.interp(r, self.pts, self.B_vals))


def green_potential(n: int, phi, r_support: float, r_grid) -> GridFunction:
    """Potential of the radial density phi in R^n (n >= 3).

    G(r) = (1/(n-2)) [ r^{2-n} int_0^r phi s^{n-1} ds + int_r^inf phi s ds ],
    which is bounded at the origin, decays like C r^{2-n}, and satisfies
    the radial Poisson equation; G' = -r^{1-n} int_0^r phi s^{n-1} ds.
    """
    tables = _potential_tables(n, phi, r_support, np.asarray(r_grid, float))
    return _tabulate_potential(n, tables, np.asarray(r_grid, float))


def _potential_tables(n, phi, r_support, r_grid):
    if n < 3:
        raise CoefficientError(f"need dimension n >= 3, got {n}")
    if np.any(r_grid <= 0):
        raise CoefficientError("grid must be strictly positive")
    _check_compact_support(phi, r_support)
    return _PotentialTables(n, phi, r_support, r_grid)


def _tabulate_potential(n, tables, r_grid):
    vals = np.array([(r ** (2 - n) * tables.A(r) + tables.B(r)) / (n - 2)
                     for r in r_grid])
    ders = np.array([-tables.A(r) * r ** (1 - n) for r in r_grid])
    return GridFunction(r_grid, vals, ders, "regular", "infinite")


def _cumulative(f, pts):
    out = np.zeros(pts.size)
    for i in range(pts.size - 1):
        seg, _ = scipy.integrate.quad(f, pts[i], pts[i + 1],
                                      epsabs=1e-14, epsrel=1e-12, limit=200)
        out[i + 1] = out[i] + seg
    return out


def _check_compact_support(phi, r_support):
    probes = r_support * np.array([1.0 + 1e-9, 1.5, 4.0, 64.0])
    try:
        vals = np.abs([float(phi(r)) for r in probes])
    except Exception as exc:
        raise CoefficientError(
            f"phi not evaluable beyond the declared support radius: {exc}") from exc
    inner = max(abs(float(phi(r))) for r in r_support * np.linspace(0.1, 0.9, 9))
    if inner == 0.0:
        raise CoefficientError("density phi vanishes identically on its support")
    if np.max(vals) > 1e-12 * inner:
        raise CoefficientError(
            f"phi does not vanish beyond the declared support radius {r_support}")


def bump_density(r_support: float, amplitude: float = 1.0):
    """Smooth compactly supported radial bump amplitude*exp(-1/(1-(r/R)^2))."""

    def phi(r):
        x = r / r_support
        if x >= 1.0:
            return 0.0
        return amplitude * math.exp(-1.0 / (1.0 - x * x))

    return phi


@dataclass(frozen=True, eq=False)
class RadialProblem:
    """Radial data for -Laplace on R^n: density phi, quotient solution u,
    tabulated potential, and the exterior closed form C r^{2-n}."""

    n: int
    phi: object
    r_support: float
    G: GridFunction
    mass: float                  # int phi s^{n-1} ds (line integral)
    C: float                     # exterior constant, = mass/(n-2)
    tables: object = None        # cumulative density moments
    u: object = None             # None means u = 1
    u_prime: object = None
    poisson_residual: float = 0.0
    params: dict = field(default_factory=dict)

    def u_at(self, r):
        return 1.0 if self.u is None else float(self.u(r))

    def u_prime_at(self, r):
        return 0.0 if self.u is None else float(self.u_prime(r))

    def G_at(self, r) -> float:
        if r >= self.r_support:
            return self.C * r ** (2 - self.n)
        return (r ** (2 - self.n) * self.tables.A(r)
                + self.tables.B(r)) / (self.n - 2)

    def G_prime_at(self, r) -> float:
        if r >= self.r_support:
            return (2 - self.n) * self.C * r ** (1 - self.n)
        return -self.tables.A(r) * r ** (1 - self.n)

    def tau(self, r) -> float:
        """The quotient G/u driving the one-dimensional reduction."""
        return self.G_at(r) / self.u_at(r)

    def tau_prime(self, r) -> float:
        u = self.u_at(r)
        return (self.G_prime_at(r) * u - self.G_at(r) * self.u_prime_at(r)) / u ** 2

    @property
    def sup_tau(self) -> float:
        return self.params["sup_tau"]

    def laplacian(self, psi, psi_p, psi_pp, r):
        """P psi = -psi'' - (n-1)/r psi' for closed-form radial psi."""
        return -psi_pp(r) - (self.n - 1) / r * psi_p(r)


def make_radial_problem(n: int, phi, r_support: float, u=None, u_prime=None,
                        grid_n: int = 2601, r_min=None) -> RadialProblem:
    """Build the potential and bookkeeping for a radial problem.

    The grid covers (r_min, r_support]; outside the support the exact
    exterior form is used, so evaluations reach arbitrarily large radii.
    The radial Poisson residual of the tabulated potential is recorded and
    must meet the module tolerance.
    """
    if u is not None and u_prime is None:
        raise CoefficientError("supply u_prime together with u")
    if r_min is None:
        r_min = r_support * 1e-5
    grid = np.geomspace(r_min, r_support, grid_n)
    tables = _potential_tables(n, phi, r_support, grid)
    G = _tabulate_potential(n, tables, grid)
    mass = tables.mass
    C = mass / (n - 2)

    resid = _poisson_residual(n, phi, G)
    params = {}
    rp = RadialProblem(n=n, phi=phi, r_support=r_support, G=G, mass=mass,
                       C=C, tables=tables, u=u, u_prime=u_prime,
                       poisson_residual=resid, params=params)
    taus = [rp.tau(r) for r in grid] + [rp.tau(r_support * (1 + 1e-12))]
    params["sup_tau"] = float(max(taus)) * 1.0
    if u is not None:
        params["u_harmonicity_residual"] = _harmonicity_residual(n, u, grid)
        far = [rp.tau(r_support * 10 ** k) for k in range(1, 5)]
        params["tau_at_infinity_decreasing"] = bool(np.all(np.diff(far) < 0))
    return rp


def _poisson_residual(n, phi, G):
    prob = SLProblem(lambda r: r ** (n - 1), 0.0,
                     Interval(0.0, math.inf, "singular", "infinite"))
    lg = apply_operator(prob, G)
    rhs = np.array([phi(r) * r ** (n - 1) for r in lg.nodes])
    return float(np.max(np.abs(lg.values - rhs)) / (1.0 + np.max(np.abs(rhs))))


def _harmonicity_residual(n, u, grid):
    vals = np.array([float(u(r)) for r in grid])
    g = GridFunction(grid, vals)
    prob = SLProblem(lambda r: r ** (n - 1), 0.0,
                     Interval(0.0, math.inf, "singular", "infinite"))
    lu = apply_operator(prob, g)
    scale = 1.0 + float(np.max(np.abs(vals)))
    return float(np.max(np.abs(lu.values / lu.nodes ** (n - 1))) / scale)


# --- pulled-back weights -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class NDWeight:
    """Radial Hardy weight W with its ground state u f(tau)."""

    W: object                  # callable of r
    kind: str                  # "classical" | "pullback" | "improved"
    ground_state: GridFunction
    v: object                  # ground state evaluator, callable of r
    rp: RadialProblem
    params: dict = field(default_factory=dict)


def _assemble_weight(rp: RadialProblem, w1d, f1d, f1d_prime, kind, params):
    """W = |tau'|^2 w(tau) + (f'/f)(tau) phi/u everywhere (the second term
    lives on the support of phi only, where P G = phi)."""

    def W(r):
        t = rp.tau(r)
        base = rp.tau_prime(r) ** 2 * w1d(t)
        if r < rp.r_support:
            fv = f1d(t)
            base = base + f1d_prime(t) / fv * rp.phi(r) / rp.u_at(r)
        return base

    def v(r):
        return rp.u_at(r) * f1d(rp.tau(r))

    grid = rp.G.nodes
    gs = GridFunction(grid, np.array([v(r) for r in grid]))
    return NDWeight(W=W, kind=kind, ground_state=gs, v=v, rp=rp, params=params)


def classical_weight(rp: RadialProblem) -> NDWeight:
    """Pullback of the classical pair: off the support,
    W = |grad log(tau)|^2 / 4 = ((n-2)/2)^2 / r^2 for u = 1."""
    fam = classical_family()
    nd = _assemble_weight(rp, fam.w, fam.f_fn, fam.f_prime_fn,
                          "classical", {})
    return nd


def pullback_weight(rp: RadialProblem, fam: WeightFamily1D) -> NDWeight:
    """Pull a 1D weight family back through tau = G/u.

    The monotonicity hypothesis f' >= 0 on the tau-image of supp phi is
    checked numerically; a violation is flagged (weight may change sign
    there), not fatal.
    """
    if fam.f_fn is None:
        hull = (fam.f_w.a, fam.f_w.b)
        if not (hull[0] <= rp.tau(rp.G.nodes[0] * 10) and rp.sup_tau <= hull[1]):
            raise CoefficientError(
                f"family ground state tabulated on {hull} does not cover the "
                f"tau image (0, {rp.sup_tau:.6g})")
    image = np.linspace(rp.tau(rp.r_support), rp.sup_tau, 101)
    fp = np.array([float(fam.f_deriv(t)) for t in image])
    params = {"provenance_1d": fam.provenance}
    if np.any(fp < 0):
        params["hypothesis_violation"] = (
            "f' < 0 on the image of supp phi; W may be negative there")
    nd = _assemble_weight(rp, lambda t: float(fam.w(t)), fam.f_eval,
                          fam.f_deriv, "pullback", params)
    wv = [nd.W(r) for r in rp.G.nodes]
    params["W_nonnegative"] = bool(np.min(wv) >= -1e-12 * (1 + np.max(np.abs(wv))))
    return nd


def improved_weight(rp: RadialProblem, a: float) -> NDWeight:
    """Pullback of the improved family: off the support,
    W = |grad tau|^2 / (tau^2 (2 - a tau)^2) >= W_class, with exact ratio
    4 / (2 - a tau)^2; requires 0 < a < 1/sup tau (1% safety margin)."""
    sup_t = rp.sup_tau
    if not 0 < a < 1.0 / (1.01 * sup_t):
        raise CoefficientError(
            f"need 0 < a < 1/sup(tau) = {1.0 / sup_t:.6g} with 1% margin, got {a}")
    fam = improved_family(a)
    params = {"a": a, "ratio_formula": "4/(2 - a tau)^2"}
    return _assemble_weight(rp, fam.w, fam.f_fn, fam.f_prime_fn,
                            "improved", params)


# --- Rellich-type inequality -------------------------------------------------

@dataclass(frozen=True)
class AnnularBump:
    """C^2 radial bump (r - r1)^3 (r2 - r)^3 on [r1, r2], zero elsewhere."""

    r1: float
    r2: float

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        inside = (r > self.r1) & (r < self.r2)
        out = np.where(inside, (r - self.r1) ** 3 * (self.r2 - r) ** 3, 0.0)
        return float(out) if out.ndim == 0 else out

    def prime(self, r):
        if not self.r1 < r < self.r2:
            return 0.0
        am = r - self.r1
        bm = self.r2 - r
        return 3 * am ** 2 * bm ** 3 - 3 * am ** 3 * bm ** 2

    def second(self, r):
        if not self.r1 < r < self.r2:
            return 0.0
        am = r - self.r1
        bm = self.r2 - r
        return 6 * am * bm ** 3 - 18 * am ** 2 * bm ** 2 + 6 * am ** 3 * bm


def random_annular_bumps(rp: RadialProblem, count: int, rng) -> list:
    """Seeded random C^2 bumps supported on exterior annuli."""
    out = []
    for _ in range(count):
        r1 = rp.r_support * (1.05 + 2.0 * rng.random())
        width = rp.r_support * (0.3 + 1.5 * rng.random())
        out.append(AnnularBump(r1, r1 + width))
    return out


def rellich_check(rp: RadialProblem, a: float, psis) -> list:
    """For each exterior test function psi, compare both sides of the
    Rellich-type inequality

        int (P psi)^2 tau / (W - W_class) dx >= int psi^2 (W - W_class) tau dx

    where W is the improved weight at parameter a (0 < a < 2/sup tau) and
    integrals are radial with volume element omega_{n-1} r^{n-1} dr.
    Returns (lhs, rhs, margin) per psi with margin = lhs - rhs, checked
    against -1e-8 (1 + lhs).
    """
    sup_t = rp.sup_tau
    if not 0 < a < 2.0 / sup_t:
        raise CoefficientError(
            f"need 0 < a < 2/sup(tau) = {2.0 / sup_t:.6g}, got {a}")
    n = rp.n
    omega = unit_sphere_area(n)

    def diff_weight(r):
        t = rp.tau(r)
        tp2 = rp.tau_prime(r) ** 2
        return tp2 * (1.0 / (t ** 2 * (2.0 - a * t) ** 2) - 1.0 / (4.0 * t ** 2))

    results = []
    for psi in psis:
        if psi.r1 < rp.r_support:
            raise CoefficientError(
                f"test function support [{psi.r1}, {psi.r2}] overlaps supp phi")
        dws = [diff_weight(r) for r in np.linspace(psi.r1, psi.r2, 41)[1:-1]]
        if min(dws) <= 0:
            raise CoefficientError("W - W_class vanishes on the test support")

        def lhs_integrand(r):
            p_psi = rp.laplacian(psi, psi.prime, psi.second, r)
            return p_psi ** 2 * rp.tau(r) / diff_weight(r) * omega * r ** (n - 1)

        def rhs_integrand(r):
            return psi(r) ** 2 * diff_weight(r) * rp.tau(r) * omega * r ** (n - 1)

        lhs, _ = scipy.integrate.quad(lhs_integrand, psi.r1, psi.r2,
                                      epsabs=1e-13, epsrel=1e-11, limit=400)
        rhs, _ = scipy.integrate.quad(rhs_integrand, psi.r1, psi.r2,
                                      epsabs=1e-13, epsrel=1e-11, limit=400)
        results.append((lhs, rhs, lhs - rhs))
    return results


# --- null-criticality at the ends --------------------------------------------

def null_criticality_integrals(rp: RadialProblem, ndw: NDWeight,
                               windows: int = 8) -> tuple:
    """Classify the ground-state pairing integral int v^2 W r^{n-1} dr at
    both radial ends.  The outer end (r -> infinity) is the end of R^n and
    carries the null-criticality content; the origin is an interior point
    of the domain, so the inner classification is typically convergent and
    reported for completeness."""
    n = rp.n

    def integrand(r):
        return ndw.v(r) ** 2 * ndw.W(r) * r ** (n - 1)

    iv = Interval(0.0, math.inf, "regular", "infinite")
    outer = classify_improper_integral(integrand, "right", iv,
                                       windows=windows,
                                       start=2.0 * rp.r_support)
    inner = classify_improper_integral(integrand, "left", iv,
                                       windows=windows,
                                       start=min(1.0, rp.r_support) * 0.5)
    return inner, outer
