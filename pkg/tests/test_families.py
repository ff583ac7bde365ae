import math

import numpy as np
import pytest
from scipy.integrate import quad

from hardy.families import (EPFamily, classical_family, ep_solution, ep_weight,
                            external_family, family_residual, improved_family,
                            improved_eigenfunction, liouville_transform,
                            series_weight_closed_form, weight_series)
from hardy.grid import GridFunction, Interval, sample
from hardy.sturm import CoefficientError, SLProblem, SolutionPair
from tests.conftest import one, zero

HALF_LINE = Interval.half_line()


def _harmonic_pair(lo=1e-3, hi=50.0, n=900):
    x = np.geomspace(lo, hi, n)
    v1 = GridFunction(x, np.ones_like(x), np.zeros_like(x))
    v2 = GridFunction(x, x, np.ones_like(x))
    return SolutionPair(v1, v2, wronskian=-1.0)


def test_ep_constraint_validated():
    with pytest.raises(CoefficientError, match="constraint"):
        EPFamily(_harmonic_pair(), 1.0, 1.0, math.sqrt(3.0), k=1.0)  # c3^2-c1c2=2
    EPFamily(_harmonic_pair(), 1.0, 1.0, math.sqrt(3.0), k=2.0)


def test_ep_solution_classical_ground_state():
    prob = SLProblem(one, zero, HALF_LINE)
    fam = EPFamily(_harmonic_pair(), 0.0, 0.0, 1.0, k=1.0)
    f = ep_solution(fam, prob=prob)
    assert np.max(np.abs(f.values - np.sqrt(2 * f.nodes))) < 1e-12
    w = ep_weight(f, k=1.0)
    assert w.w(1.0) == pytest.approx(0.25)
    assert w.provenance == "ep"


def test_ep_solution_shifted_radicand():
    prob = SLProblem(one, zero, HALF_LINE)
    fam = EPFamily(_harmonic_pair(), 1.0, 0.0, 1.0, k=1.0)
    f = ep_solution(fam, prob=prob)
    exact = np.sqrt(1 + 2 * f.nodes)
    assert np.max(np.abs(f.values - exact)) < 1e-12
    # -f'' = 1/f^3 via the analytic second derivative of sqrt(1+2t)
    fpp = -((1 + 2 * f.nodes) ** -1.5)
    assert np.max(np.abs(-fpp - 1.0 / exact ** 3)) < 1e-8


def test_ep_solution_excludes_isolated_zero():
    # c3 < 0 flips the radicand sign at t = 1/2; the domain keeps the side
    # containing the reference point, shrunk by one cell
    fam = EPFamily(_harmonic_pair(), 1.0, 0.0, -1.0, k=1.0)
    f = ep_solution(fam, ref=1.0)
    assert f.a > 0.5
    assert np.all(f.values > 0)
    assert np.max(np.abs(f.values - np.sqrt(2 * f.nodes - 1))) < 1e-12


def test_ep_weight_requires_positive_f():
    x = np.linspace(0.1, 1.0, 30)
    f = GridFunction(x, x - 0.5, np.ones_like(x))
    with pytest.raises(CoefficientError):
        ep_weight(f, k=1.0)
    with pytest.raises(CoefficientError):
        ep_weight(GridFunction(x, x, np.ones_like(x)), k=-1.0)


def test_ep_weight_constant_one():
    x = np.linspace(0.1, 5.0, 100)
    f = GridFunction(x, np.ones_like(x), np.zeros_like(x))
    w = ep_weight(f, k=1.0)
    assert w.w(2.0) == 1.0  # packaging succeeds; certification is elsewhere


@pytest.mark.parametrize("a", [0.1, 0.5, 1.0, 2.0])
def test_improved_family_exact_identity(a):
    fam = improved_family(a)
    b = 2.0 / a
    ts = np.geomspace(1e-4 * b, (1 - 1e-4) * b, 1000)
    assert np.max(np.abs(fam.pointwise_residual(ts))) <= 1e-8


def test_improved_family_values_and_range():
    fam = improved_family(1.0)
    assert fam.iv.b == 2.0
    assert fam.w(1.0) == 1.0
    assert fam.f_eval(1.0) == 1.0
    fam2 = improved_family(0.5)
    assert fam2.iv.b == 4.0
    assert fam2.w(2.0) == pytest.approx(0.25)
    with pytest.raises(CoefficientError):
        improved_family(0.0)
    with pytest.raises(CoefficientError):
        improved_family(-1.0)


def test_classical_family_residual_in_tolerance():
    prob = SLProblem(one, zero, HALF_LINE)
    fam = classical_family()
    assert family_residual(prob, fam) <= 1e-6


# --- oscillating eigenfunctions ----------------------------------------------

def test_eigenfunction_boundary_values():
    ef = improved_eigenfunction(1.0, 2.0, 1.0)
    t_left, t_right = ef.window
    assert t_right == pytest.approx(2.0 / 3.0)
    assert ef(t_right) == pytest.approx(math.sqrt(8.0 / 9.0))
    assert abs(ef(t_left)) <= 1e-9
    bc = (ef.M ** 2 - ef.a ** 2) / (4 * ef.M)
    assert ef.derivative(t_right) == pytest.approx(bc * ef(t_right), abs=1e-9)


def test_eigenfunction_triple_frequency_shares_left_zero():
    ef = improved_eigenfunction(1.0, 2.0, 1.0)
    ef3 = improved_eigenfunction(1.0, 2.0, 3.0)
    t_left = ef.window[0]
    assert abs(ef3(t_left)) <= 1e-9


@pytest.mark.parametrize("a", [0.5, 1.0])
@pytest.mark.parametrize("M", [1.0, 2.0, 5.0])
@pytest.mark.parametrize("xi", [0.25, 1.0, 4.0])
def test_eigenfunction_parameter_grid(a, M, xi):
    ef = improved_eigenfunction(a, M, xi)
    t_left, t_right = ef.window
    interior = np.linspace(t_left, t_right, 1501)[1:-1]
    assert np.max(np.abs(ef.residual(interior))) <= 1e-7
    assert np.all(np.abs(ef(interior)) <= ef.envelope(interior) + 1e-12)


def test_eigenfunction_converges_to_envelope_as_xi_vanishes():
    sups = []
    for xi in (1.0, 0.5, 0.25, 0.125):
        ef = improved_eigenfunction(1.0, 2.0, xi)
        ts = np.linspace(*ef.window, 4001)
        sups.append(float(np.max(np.abs(ef(ts) - ef.envelope(ts)))))
    assert all(s1 > s2 for s1, s2 in zip(sups, sups[1:]))
    assert sups[-1] < 0.01


def test_eigenfunction_rejects_bad_parameters():
    with pytest.raises(CoefficientError):
        improved_eigenfunction(-1.0, 2.0, 1.0)
    with pytest.raises(CoefficientError):
        improved_eigenfunction(1.0, 2.0, 0.0)


# --- Liouville transform -------------------------------------------------------

def test_liouville_quadratic_envelope_density_is_flat():
    iv = Interval(0.0, 2.0, "singular", "singular")
    s_map, q_hat = liouville_transform(lambda t: (2 * t - t * t) ** -2.0, iv,
                                       cutoffs=(0.05, 1.95))
    sel = (q_hat.nodes >= 0.05) & (q_hat.nodes <= 1.95)
    assert np.max(np.abs(q_hat.values[sel])) <= 1e-6


def test_liouville_constant_density():
    s_map, q_hat = liouville_transform(one, Interval(0.0, 1.0, "singular", "regular"),
                                       cutoffs=(0.1, 0.9))
    assert np.max(np.abs(q_hat.values + 1.0)) < 1e-12
    assert np.max(np.abs(s_map.values - (s_map.nodes - 0.1))) < 1e-12


def test_liouville_inverse_square_density():
    s_map, _ = liouville_transform(lambda t: t ** -2.0,
                                   Interval(0.0, 1.0, "singular", "regular"),
                                   cutoffs=(0.01, 0.9), grading="log-left")
    assert np.max(np.abs(s_map.values - np.log(s_map.nodes / 0.01))) < 1e-6


# --- iterated weight series ----------------------------------------------------

L = 3.0


def _example_start_pair():
    nodes = np.geomspace(L * 1e-5, L * (1 - 1e-9), 1600)
    v1 = sample(lambda t: math.sqrt(2.0) * t, nodes, deriv=lambda t: math.sqrt(2.0))
    v2 = sample(lambda t: (L - t) / (math.sqrt(2.0) * L), nodes,
                deriv=lambda t: -1.0 / (math.sqrt(2.0) * L))
    return SolutionPair(v1, v2, wronskian=1.0)


def test_series_first_step_recovers_classical():
    """With the harmonic start pair and c = (1/L, 0, 1) the first ground
    state is sqrt(2 t) and the first weight is the classical one."""
    prob = SLProblem(one, zero, HALF_LINE)
    res = weight_series(prob, L - 1.0, [(1 / L, 0.0, 1.0)], 1,
                        anchor_policy="fixed", start_pair=_example_start_pair(),
                        alphas=[0.0], betas=[1.0])
    y1 = res.weights[0].f_w
    assert np.max(np.abs(y1.values - np.sqrt(2 * y1.nodes))) < 1e-10
    ts = y1.nodes[y1.nodes < L * 0.99]
    w_vals = res.weights[0].w(ts)
    assert np.max(np.abs(w_vals - 1 / (4 * ts ** 2)) * 4 * ts ** 2) < 1e-8


def test_series_agrees_with_closed_form_recursion():
    prob = SLProblem(one, zero, HALF_LINE)
    res = weight_series(prob, L - 1.0, [(1 / L, 0.0, 1.0)], 2,
                        anchor_policy="fixed", start_pair=_example_start_pair(),
                        alphas=[0.0, 0.0], betas=[1.0, 1.0])
    closed = series_weight_closed_form(L, 1 / L, 0.0, 2)
    cum = res.cumulative[-1]
    xs = cum.nodes[(cum.nodes > cum.nodes[0] * 1.5) & (cum.nodes < L * 0.999)]
    diff = np.abs(cum(xs) - closed(xs)) / (1.0 + np.abs(closed(xs)))
    assert np.max(diff) < 1e-6


def test_series_partial_sums_strictly_increase():
    prob = SLProblem(one, zero, HALF_LINE)
    res = weight_series(prob, 1.0, [(1.0, 1.0, math.sqrt(2.0))], 3)
    for lo_fam, hi_fam in zip(res.cumulative, res.cumulative[1:]):
        assert np.all(hi_fam.values > lo_fam.values)
    assert [w.provenance for w in res.weights] == \
        ["series(1)", "series(2)", "series(3)"]
    # shrinking margins follow eps_j = eps_{j-1} + 2^{-j}
    assert res.windows == [(0.0, 2.0), (0.0, 1.5), (0.0, 1.25)]


def test_series_monotone_convergence_bound():
    """The partial sums tested against a fixed smooth bump stay below the
    quadratic form of the bump (monotone convergence toward a weight)."""
    prob = SLProblem(one, zero, HALF_LINE)
    res = weight_series(prob, 1.0, [(1.0, 1.0, math.sqrt(2.0))], 3)

    r1, r2 = 0.3, 1.1

    def bump(t):
        if not r1 < t < r2:
            return 0.0
        return (t - r1) ** 3 * (r2 - t) ** 3

    def bump_prime(t):
        if not r1 < t < r2:
            return 0.0
        return 3 * (t - r1) ** 2 * (r2 - t) ** 3 - 3 * (t - r1) ** 3 * (r2 - t) ** 2

    form = quad(lambda t: bump_prime(t) ** 2, r1, r2)[0]
    vals = []
    for cum in res.cumulative:
        vals.append(quad(lambda t: float(cum(np.clip(t, cum.a, cum.b)))
                         * bump(t) ** 2, r1, r2)[0])
    assert vals == sorted(vals)
    assert vals[-1] <= form


def test_series_rejects_oscillatory_operator():
    prob = SLProblem(one, lambda t: -4.0, HALF_LINE)
    with pytest.raises(CoefficientError, match="oscillat"):
        weight_series(prob, 1.0, [(1.0, 1.0, math.sqrt(2.0))], 1)


def test_series_validates_coefficients():
    prob = SLProblem(one, zero, HALF_LINE)
    with pytest.raises(CoefficientError, match="constraint"):
        weight_series(prob, 1.0, [(1.0, 1.0, 1.0)], 1)
    with pytest.raises(CoefficientError, match="c1 > 0"):
        weight_series(prob, 1.0, [(-1.0, 0.0, 1.0)], 1)
    with pytest.raises(CoefficientError, match="depth"):
        weight_series(prob, 1.0, [(1.0, 0.0, 1.0)], 0)


# --- closed-form recursion ------------------------------------------------------

def test_closed_form_depth_one_classical():
    cf = series_weight_closed_form(L, 1 / L, 0.0, 1)
    ts = np.geomspace(1e-5 * L, L * (1 - 1e-6), 500)
    assert np.max(np.abs(cf.g(1, ts) - 0.5 * np.log(L / ts))) <= 1e-8
    w_class = 1 / (4 * ts ** 2)
    assert np.max(np.abs(cf(ts) - w_class) / w_class) <= 1e-8


def test_closed_form_second_term_hand_derived():
    # G_2' = -L / (2 t (1 + L ln(L/t))), differentiated by hand
    cf = series_weight_closed_form(L, 1 / L, 0.0, 2)
    ts = np.geomspace(1e-4 * L, L * 0.999, 300)
    expect = L ** 2 / (4 * ts ** 2 * (1 + L * np.log(L / ts)) ** 2)
    assert np.max(np.abs(cf.term(2, ts) - expect) / expect) < 1e-12
    assert np.all(cf(ts) > 1 / (4 * ts ** 2))


@pytest.mark.parametrize("c1_scale", [1.0, 0.5, 0.1])
def test_closed_form_dominates_classical(c1_scale):
    cf = series_weight_closed_form(L, c1_scale / L, 0.0, 2)
    ts = np.geomspace(1e-6 * L, L * (1 - 1e-9), 500)
    assert np.all(cf(ts) > 1 / (4 * ts ** 2))


def test_closed_form_quadratic_branch_derivative_oracle():
    """c2 > 0 exercises the two-root antiderivative; cross-check g_prime
    against a centered difference of g."""
    cf = series_weight_closed_form(L, 1.0, 0.7, 3)
    ts = np.geomspace(0.05, L * 0.98, 60)
    h = 1e-6
    for k in (1, 2, 3):
        fd = (cf.g(k, ts + h) - cf.g(k, ts - h)) / (2 * h)
        gp = cf.g_prime(k, ts)
        assert np.max(np.abs(fd - gp) / (1e-12 + np.abs(gp))) < 1e-7


def test_closed_form_matches_numeric_with_c2():
    prob = SLProblem(one, zero, HALF_LINE)
    c1, c2 = 0.8, 0.5
    c3 = math.sqrt(1 + c1 * c2)
    res = weight_series(prob, L - 1.0, [(c1, c2, c3)], 2,
                        anchor_policy="fixed", start_pair=_example_start_pair(),
                        alphas=[0.0, 0.0], betas=[1.0, 1.0])
    closed = series_weight_closed_form(L, c1, c2, 2)
    cum = res.cumulative[-1]
    xs = cum.nodes[(cum.nodes > cum.nodes[0] * 1.5) & (cum.nodes < L * 0.999)]
    diff = np.abs(cum(xs) - closed(xs)) / (1.0 + np.abs(closed(xs)))
    assert np.max(diff) < 1e-6


def test_closed_form_validation():
    with pytest.raises(CoefficientError):
        series_weight_closed_form(-1.0, 1.0, 0.0, 1)
    with pytest.raises(CoefficientError):
        series_weight_closed_form(1.0, 0.0, 0.0, 1)
    with pytest.raises(CoefficientError):
        series_weight_closed_form(1.0, 1.0, 0.0, 0)


def test_external_family_wraps_expressions():
    iv = Interval(0.0, 1.0, "singular", "regular")
    fam = external_family(lambda t: 1 / (4 * t * t), lambda t: np.sqrt(2 * t), iv,
                          f_prime_fn=lambda t: 1 / np.sqrt(2 * t))
    assert fam.provenance == "external"
    prob = SLProblem(one, zero, iv)
    assert family_residual(prob, fam) < 1e-6
