import math

import numpy as np
import pytest

from hardy.grid import Interval
from hardy.ode import pruefer_zero_count, solve_ivp
from tests.conftest import euler_zero_count, one, zero


def test_constants_are_harmonic():
    g = solve_ivp(one, zero, None, 0.0, 1.0, 1.0, 0.0, np.linspace(0.2, 5.0, 30))
    assert np.max(np.abs(g.values - 1.0)) < 1e-12
    assert np.max(np.abs(g.derivatives)) < 1e-12


def test_reproduces_quadratic_envelope_ground_state():
    # -y'' = w y with w = (2t - t^2)^-2 and data of sqrt(2t - t^2) at t = 1
    w = lambda t: (2 * t - t * t) ** -2.0
    targets = np.geomspace(0.01, 1.9, 300)
    g = solve_ivp(one, zero, w, 1.0, 1.0, 1.0, 0.0, targets)
    exact = np.sqrt(2 * targets - targets ** 2)
    assert np.max(np.abs(g.values - exact)) < 1e-8


def test_sinh():
    g = solve_ivp(one, one, None, 0.0, 0.0, 0.0, 1.0, np.linspace(0.2, 3.0, 15))
    assert np.max(np.abs(g.values - np.sinh(g.nodes))
                  / np.abs(np.sinh(g.nodes))) < 1e-9


def test_rtol_halving_changes_little():
    w = lambda t: (2 * t - t * t) ** -2.0
    targets = np.geomspace(0.01, 1.9, 100)
    g1 = solve_ivp(one, zero, w, 1.0, 1.0, 1.0, 0.0, targets, rtol=1e-8)
    g2 = solve_ivp(one, zero, w, 1.0, 1.0, 1.0, 0.0, targets, rtol=5e-9)
    est = 1e-8 * float(np.max(np.abs(g1.values))) + 1e-12
    assert np.max(np.abs(g1.values - g2.values)) < 10 * est


def test_pruefer_sine_zeros():
    assert pruefer_zero_count(one, one, 0.1, 3 * math.pi + 0.1) == 3
    assert pruefer_zero_count(one, one, 0.1, 3 * math.pi + 0.1 - 1e-6) == 2


@pytest.mark.parametrize("eps", [1e-4, 1e-6, 1e-8])
def test_pruefer_euler_oscillatory(eps):
    # -y'' = 2/(4t^2) y on (eps, 1): zeros at eps * exp(2 pi k)
    count = pruefer_zero_count(one, lambda t: 2.0 / (4 * t * t), eps, 1.0)
    assert abs(count - euler_zero_count(2.0, eps)) <= 1


@pytest.mark.parametrize("eps", [1e-4, 1e-6, 1e-8])
def test_pruefer_euler_critical_no_zeros(eps):
    # lam = 1 is the non-oscillatory borderline: solution sqrt(t), no zeros
    assert pruefer_zero_count(one, lambda t: 1.0 / (4 * t * t), eps, 1.0) == 0


@pytest.mark.parametrize("lam", [1.5, 2.0, 5.0])
@pytest.mark.parametrize("eps", [1e-4, 1e-6, 1e-8])
def test_pruefer_matches_closed_form_count(lam, eps):
    count = pruefer_zero_count(one, lambda t: lam / (4 * t * t), eps, 1.0)
    assert abs(count - euler_zero_count(lam, eps)) <= 1


def test_pruefer_monotone_in_endpoint_and_coupling():
    counts_t = [pruefer_zero_count(one, lambda t: 2.0 / (4 * t * t), 1e-6, T)
                for T in (0.01, 0.1, 1.0, 10.0)]
    assert counts_t == sorted(counts_t)
    counts_lam = [pruefer_zero_count(one, lambda t, lam=lam: lam / (4 * t * t),
                                     1e-6, 1.0)
                  for lam in (1.5, 2.0, 5.0, 10.0)]
    assert counts_lam == sorted(counts_lam)


def test_solve_ivp_two_sided_targets():
    targets = np.array([0.5, 0.9, 1.0, 1.5, 3.0])
    g = solve_ivp(one, zero, None, 0.0, 1.0, 2.0, 3.0, targets)
    assert np.allclose(g.values, 2.0 + 3.0 * (targets - 1.0), atol=1e-10)
    assert np.allclose(g.derivatives, 3.0, atol=1e-10)
