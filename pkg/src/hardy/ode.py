"""Second-order linear ODE integration and oscillation counting.

Everything runs through an embedded Runge-Kutta 5(4) pair with adaptive
steps and dense output; singular endpoints are approached through cutoffs,
never evaluated.  The phase equation used for zero counting is the polar
rewriting of -(p y')' = Q y in the variables (y, p y') = r (sin, cos).
"""

from __future__ import annotations

import math

import numpy as np
import scipy.integrate

from .grid import GridFunction

__all__ = ["solve_ivp", "pruefer_zero_count", "IntegrationError"]

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12

# Phase slack when deciding whether the angle reached a multiple of pi;
# a zero sitting exactly on t_end would otherwise be dropped by roundoff.
_PHASE_TOL = 1e-8


class IntegrationError(RuntimeError):
    def __init__(self, message, last_t=None):
        if last_t is not None:
            message = f"{message} (last reachable point t = {last_t!r})"
        super().__init__(message)
        self.last_t = last_t


def solve_ivp(p, q, w, lam, t0, y0, yp0, targets,
              rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> GridFunction:
    """Integrate -(p y')' + q y = lam * w * y from initial data at ``t0``.

    The state is (y, p y'); ``targets`` is any set of points on either side
    of ``t0``, and the returned GridFunction carries both y and y' at all
    of them (dense output fills targets between accepted steps).

    Parameters
    ----------
    p, q, w:
        Coefficient callables; ``w=None`` means the homogeneous case
        (equivalent to lam = 0).
    lam:
        Spectral coupling multiplying ``w``.
    t0, y0, yp0:
        Initial point, value, and derivative y'(t0) (not p y').
    targets:
        Points at which to report the solution, interior to the domain.
    """
    targets = np.sort(np.unique(np.asarray(targets, dtype=float)))
    if targets.size == 0:
        raise ValueError("no targets supplied")
    if w is None:
        lam = 0.0
        w = _zero
    u0 = np.array([float(y0), float(p(t0)) * float(yp0)])

    def rhs(t, u):
        return [u[1] / p(t), (q(t) - lam * w(t)) * u[0]]

    vals = np.empty_like(targets)
    ders = np.empty_like(targets)
    hit = np.zeros(targets.shape, dtype=bool)

    at0 = np.isclose(targets, t0, rtol=1e-14, atol=0.0)
    vals[at0] = y0
    ders[at0] = yp0
    hit |= at0

    for side in (-1, 1):
        sel = (targets < t0) if side < 0 else (targets > t0)
        sel &= ~at0
        if not np.any(sel):
            continue
        pts = targets[sel]
        t_end = pts[0] if side < 0 else pts[-1]
        sol = scipy.integrate.solve_ivp(
            rhs, (t0, t_end), u0, method="RK45",
            t_eval=pts[::-1] if side < 0 else pts,
            rtol=rtol, atol=atol, dense_output=False)
        if not sol.success:
            last = sol.t[-1] if sol.t.size else t0
            raise IntegrationError(f"integration failed: {sol.message}", last_t=last)
        order = slice(None, None, -1) if side < 0 else slice(None)
        y = sol.y[0][order]
        py = sol.y[1][order]
        vals[sel] = y
        ders[sel] = py / np.array([p(t) for t in pts])
        hit[sel] = True

    if not np.all(hit):
        raise IntegrationError("some targets unreachable")
    return GridFunction(targets, vals, ders)


def _zero(t):
    return 0.0


def pruefer_zero_count(p, q_eff, t_start, t_end, init_angle=0.0,
                       rtol=1e-9, atol=1e-11) -> int:
    """Count zeros on (t_start, t_end] of the solution of -(p y')' = q_eff y
    launched with phase ``init_angle`` at ``t_start``.

    The phase obeys theta' = cos^2(theta)/p + q_eff sin^2(theta) and crosses
    multiples of pi only upward (theta' = 1/p > 0 there), so the count is the
    number of multiples of pi in (theta(t_start), theta(t_end)].

    Windows spanning many decades are integrated in geometric segments with
    a bounded first step per segment; otherwise the step-size heuristics can
    leap over the boundary layer near a deep singular cutoff and silently
    drop phase.
    """
    if not t_start < t_end:
        raise ValueError("need t_start < t_end")

    def rhs(t, th):
        c = math.cos(th[0])
        s = math.sin(th[0])
        return [c * c / p(t) + q_eff(t) * s * s]

    if t_start > 0 and t_end / t_start > 8.0:
        n_seg = max(1, int(math.ceil(math.log(t_end / t_start))))
        breaks = np.geomspace(t_start, t_end, n_seg + 1)
    else:
        breaks = np.array([t_start, t_end])

    theta = float(init_angle)
    for a, b in zip(breaks[:-1], breaks[1:]):
        first = min((b - a) / 8.0, a / 4.0 if a > 0 else (b - a) / 8.0)
        sol = scipy.integrate.solve_ivp(
            rhs, (a, b), [theta], method="RK45",
            rtol=rtol, atol=atol, first_step=first, max_step=b - a)
        if not sol.success:
            last = sol.t[-1] if sol.t.size else a
            raise IntegrationError(f"phase integration failed: {sol.message}",
                                   last_t=last)
        theta = float(sol.y[0, -1])

    k_end = math.floor(theta / math.pi + _PHASE_TOL)
    k_start = math.floor(init_angle / math.pi + _PHASE_TOL)
    return max(0, k_end - k_start)
