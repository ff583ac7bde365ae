import math

import numpy as np
import pytest

from hardy.grid import GridError, GridFunction, Interval, make_grid, sample


def test_interval_validation():
    with pytest.raises(GridError):
        Interval(1.0, 0.5)
    with pytest.raises(GridError):
        Interval(0.0, math.inf, "regular", "regular")  # inf must be tagged
    with pytest.raises(GridError):
        Interval(0.0, 1.0, "infinite", "regular")
    iv = Interval.half_line()
    assert iv.left_kind == "singular" and iv.right_kind == "infinite"
    assert iv.reference_point == 1.0
    assert Interval(0.0, 4.0, "singular", "singular").reference_point == 2.0
    assert Interval(2.0, 6.0).reference_point == 4.0


def test_make_grid_log_left_clusters_toward_zero():
    iv = Interval(0.0, 1.0, "singular", "regular")
    g = make_grid(iv, (1e-6, 1 - 1e-6), 100, "log-left")
    gaps = np.diff(g)
    # first gaps shrink geometrically toward 0
    assert np.all(gaps[:10] < gaps[1:11] * 1.0 + 1e-30)
    ratios = gaps[1:10] / gaps[:9]
    assert np.all(ratios > 1.0)
    assert np.allclose(ratios, ratios[0], rtol=1e-6)
    assert g[0] == pytest.approx(1e-6)
    assert g[-1] == pytest.approx(1 - 1e-6)


def test_make_grid_log_both_symmetric_on_half_line():
    iv = Interval.half_line()
    g = make_grid(iv, (1e-4, 1e4), 201, "log-both")
    # symmetric in log scale about 1
    assert np.allclose(np.log(g), -np.log(g[::-1]), atol=1e-12)


def test_make_grid_log_both_smooth_on_bounded():
    iv = Interval(0.0, 4.0, "singular", "singular")
    g = make_grid(iv, (1e-3, 3.9), 500, "log-both")
    gaps = np.diff(g)
    # spacing varies smoothly: no junction jump
    assert np.max(gaps[1:] / gaps[:-1]) < 1.05
    assert np.all(np.diff(g) > 0)


def test_make_grid_errors():
    iv = Interval(0.0, 1.0, "singular", "regular")
    with pytest.raises(GridError):
        make_grid(iv, (2.0, 3.0), 50)
    with pytest.raises(GridError):
        make_grid(iv, (0.1, 0.9), 8)
    with pytest.raises(GridError):
        make_grid(iv, (0.1, 0.9), 50, "log-middle")


def test_gridfunction_node_exactness():
    x = np.geomspace(0.1, 10.0, 40)
    vals = np.sin(x)
    f_lin = GridFunction(x, vals)
    f_her = GridFunction(x, vals, np.cos(x))
    assert np.all(f_lin(x) == vals)
    assert np.allclose(f_her(x), vals, rtol=0, atol=1e-15)
    # Hermite beats linear between nodes
    mid = np.sqrt(x[:-1] * x[1:])
    assert np.max(np.abs(f_her(mid) - np.sin(mid))) < \
        np.max(np.abs(f_lin(mid) - np.sin(mid)))
    assert f_her.derivative(x[7]) == pytest.approx(np.cos(x[7]), abs=1e-14)


def test_gridfunction_validation():
    with pytest.raises(GridError):
        GridFunction([1.0, 1.0, 2.0], [0.0, 0.0, 0.0])
    with pytest.raises(GridError):
        GridFunction([1.0, 2.0], [0.0, np.nan])
    with pytest.raises(GridError):
        GridFunction([1.0, 2.0, 3.0], [0.0, 1.0])
    f = GridFunction([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(GridError):
        f(1.5)


def test_gridfunction_helpers():
    x = np.linspace(1.0, 2.0, 11)
    f = GridFunction(x, x ** 2, 2 * x)
    g = f.restrict(1.2, 1.8)
    assert g.nodes[0] >= 1.2 and g.nodes[-1] <= 1.8
    h = f.normalized_at(1.5)
    assert h(1.5) == pytest.approx(1.0)
    lo, hi = f.positivity_domain()
    assert (lo, hi) == (1.0, 2.0)


def test_sample_callable():
    x = np.linspace(0.5, 2.0, 21)
    f = sample(np.exp, x, deriv=np.exp)
    assert f(1.0) == pytest.approx(math.e, rel=1e-6)
