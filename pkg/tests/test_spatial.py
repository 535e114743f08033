import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from tfzeros.gaf import sample_poisson
from tfzeros.patterns import PointPattern, Window
from tfzeros.rng import SeededStream
from tfzeros.spatial import (
    SummaryCurve,
    count_variance,
    default_r_values,
    estimate_F,
    estimate_K,
    estimate_K_L,
    estimate_pcf,
    poisson_F,
    query_grid,
    read_curve_csv,
    write_curve_csv,
)

UNIT = Window(0, 1, 0, 1)


def brute_K(points, window, r_values):
    n = len(points)
    lam2 = n * (n - 1) / window.area**2
    out = []
    for r in r_values:
        total = 0.0
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                v = points[i] - points[j]
                if abs(v) < r:
                    total += 1.0 / ((window.width - abs(v.real)) * (window.height - abs(v.imag)))
        out.append(total / lam2)
    return np.array(out)


def brute_F(points, window, r_values, spacing):
    q = query_grid(window, spacing)
    nearest = np.array([np.min(np.abs(points - z)) for z in q])
    border = window.boundary_distance(q)
    f = []
    for r in r_values:
        ok = border >= r
        f.append(np.mean(nearest[ok] <= r) if ok.any() and r > 0 else 0.0)
    return np.maximum.accumulate(f)


@st.composite
def small_patterns(draw, min_size=2, max_size=10):
    a = draw(st.floats(1.0, 5.0))
    b = draw(st.floats(1.0, 5.0))
    n = draw(st.integers(min_size, max_size))
    xs = draw(st.lists(st.floats(0.001, 0.999), min_size=n, max_size=n))
    ys = draw(st.lists(st.floats(0.001, 0.999), min_size=n, max_size=n))
    pts = np.unique(np.array([a * x + 1j * b * y for x, y in zip(xs, ys)]))
    if len(pts) < min_size:
        pts = np.array([0.1 * a + 0.1j * b, 0.6 * a + 0.7j * b])
    return PointPattern(pts, Window(0, a, 0, b))


def poisson(seed, lam=1.0, half=10.0):
    return sample_poisson(lam, Window.square(half), SeededStream(seed))


class TestK:
    @given(small_patterns())
    @settings(max_examples=60, deadline=None)
    def test_brute_force(self, p):
        r = np.linspace(0, 0.49 * min(p.window.width, p.window.height), 25)
        assert_allclose(estimate_K(p, r).values, brute_K(p.points, p.window, r), rtol=1e-12, atol=1e-12)

    def test_two_point_jump(self):
        p = PointPattern(np.array([0.2 + 0.2j, 1.2 + 0.2j]), Window(0, 3, 0, 3))
        r = np.array([0.5, 1.0 - 1e-9, 1.0, 1.0 + 1e-9])
        k = estimate_K(p, r).values
        # each ordered pair carries weight 1 / ((3 - 1) * 3); lambda2 = 2 / 81
        assert_array_equal(k[:3], 0.0)
        assert k[3] == pytest.approx(2 / 6 / (2 / 81))

    @given(small_patterns())
    @settings(max_examples=40, deadline=None)
    def test_nondecreasing(self, p):
        r = np.linspace(0, 0.49 * min(p.window.width, p.window.height), 40)
        k, l_curve = estimate_K_L(p, r)
        assert np.all(np.diff(k.values) >= 0)
        assert_allclose(l_curve.values, np.sqrt(k.values / math.pi))

    def test_errors(self):
        with pytest.raises(ValueError):
            estimate_K(PointPattern(np.array([0.5 + 0.5j]), UNIT), [0.1])
        p = PointPattern(np.array([0.2 + 0.2j, 0.5 + 0.5j]), UNIT)
        with pytest.raises(ValueError):
            estimate_K(p, [0.1, 0.5])
        with pytest.raises(ValueError):
            estimate_K(p, [0.2, 0.1])

    def test_poisson_mean_near_identity(self):
        r = np.linspace(0.1, 3.0, 30)
        dev = np.array([estimate_K_L(poisson(i), r)[1].values - r for i in range(100)])
        band = 3 * dev.std(axis=0, ddof=1) / math.sqrt(len(dev))
        assert np.all(np.abs(dev.mean(axis=0)) < band)


class TestF:
    def test_zero_at_origin(self):
        f = estimate_F(poisson(1), np.linspace(0, 2, 11))
        assert f.values[0] == 0.0

    @given(small_patterns(min_size=1))
    @settings(max_examples=30, deadline=None)
    def test_distribution_function(self, p):
        r = np.linspace(0, 0.49 * min(p.window.width, p.window.height), 30)
        f = estimate_F(p, r).values
        assert np.all((f >= 0) & (f <= 1))
        assert np.all(np.diff(f) >= 0)

    @given(small_patterns(min_size=1, max_size=6))
    @settings(max_examples=20, deadline=None)
    def test_brute_force(self, p):
        r = np.linspace(0, 0.45 * min(p.window.width, p.window.height), 15)
        spacing = min(p.window.width, p.window.height) / 20
        assert_allclose(estimate_F(p, r, spacing).values, brute_F(p.points, p.window, r, spacing), atol=1e-12)

    def test_poisson_matches_theory(self):
        r = np.linspace(0, 1.5, 31)
        f = np.mean([estimate_F(poisson(i), r, 0.1).values for i in range(50)], axis=0)
        assert np.max(np.abs(f - poisson_F(r, 1.0))) < 0.02

    def test_empty(self):
        with pytest.raises(ValueError):
            estimate_F(PointPattern(np.empty(0, complex), UNIT), [0.1])

    def test_query_grid(self):
        q = query_grid(Window(0, 2, 0, 1), 0.5)
        assert q.shape == (8,)
        assert_allclose(sorted(set(q.real)), [0.25, 0.75, 1.25, 1.75])
        assert_allclose(sorted(set(q.imag)), [0.25, 0.75])


class TestPcf:
    def test_two_point_bump(self):
        w = Window(0, 4, 0, 4)
        p = PointPattern(np.array([1 + 1j, 2.5 + 1j]), w)
        h = 0.2
        r = np.linspace(0.5, 1.9, 141)
        g = estimate_pcf(p, r, h).values
        support = np.abs(r - 1.5) < h
        assert np.all(g[~support] == 0)
        assert r[np.argmax(g)] == pytest.approx(1.5, abs=0.011)
        # direct evaluation at the centre: 2 ordered pairs, Epanechnikov peak 0.75/h
        expected = 2 * 0.75 / h / (2 * math.pi * 1.5 * (4 - 1.5) * 4) / (2 / 256)
        assert g[100] == pytest.approx(expected)

    def test_poisson_near_one(self):
        r = np.linspace(0.5, 3, 26)
        g = np.mean([estimate_pcf(poisson(i), r, 0.3).values for i in range(60)], axis=0)
        assert np.max(np.abs(g - 1)) < 0.1

    def test_bad_bandwidth(self):
        with pytest.raises(ValueError):
            estimate_pcf(poisson(1), [0.5, 1.0], 0.0)


class TestInvariance:
    @given(small_patterns(), st.complex_numbers(max_magnitude=50, allow_nan=False, allow_infinity=False))
    @settings(max_examples=30, deadline=None)
    def test_translation(self, p, shift):
        r = np.linspace(0, 0.45 * min(p.window.width, p.window.height), 12)
        q = p.translated(shift)
        assert_allclose(estimate_K(q, r).values, estimate_K(p, r).values, rtol=1e-9, atol=1e-9)
        assert_allclose(estimate_pcf(q, r[1:], 0.1).values, estimate_pcf(p, r[1:], 0.1).values, rtol=1e-9, atol=1e-9)

    def test_quarter_turn(self):
        p = poisson(3, half=5.0)
        q = PointPattern(1j * p.points, p.window)  # square window centred at 0
        r = np.linspace(0, 2, 21)
        assert_allclose(estimate_K(q, r).values, estimate_K(p, r).values, rtol=1e-12)
        assert_allclose(estimate_F(q, r, 0.25).values, estimate_F(p, r, 0.25).values)
        assert_allclose(estimate_pcf(q, r[1:], 0.2).values, estimate_pcf(p, r[1:], 0.2).values, rtol=1e-12)

    @given(small_patterns(), st.floats(0.1, 10))
    @settings(max_examples=30, deadline=None)
    def test_scaling(self, p, c):
        w = p.window
        scaled = PointPattern(c * p.points, Window(c * w.x_min, c * w.x_max, c * w.y_min, c * w.y_max))
        r = np.linspace(0, 0.45 * min(w.width, w.height), 12)
        # K scales with area; K(cr) on the scaled pattern is c^2 K(r)
        assert_allclose(estimate_K(scaled, c * r).values, c**2 * estimate_K(p, r).values, rtol=1e-9, atol=1e-9)


class TestCountVariance:
    def test_poisson(self):
        pats = [poisson(i, half=6.0) for i in range(300)]
        mean, var = count_variance(pats, 2.0)
        assert mean == pytest.approx(4 * math.pi, rel=0.06)
        assert var == pytest.approx(mean, rel=0.2)

    def test_errors(self):
        pats = [poisson(i, half=3.0) for i in range(30)]
        with pytest.raises(ValueError):
            count_variance(pats[:10], 1.0)
        with pytest.raises(ValueError):
            count_variance(pats, 3.5)


class TestCurve:
    def test_validation(self):
        with pytest.raises(ValueError):
            SummaryCurve([0, 1], [0], "K")
        with pytest.raises(ValueError):
            SummaryCurve([1, 0], [0, 0], "K")
        with pytest.raises(ValueError):
            SummaryCurve([0, 1], [0, 0], "Q")

    def test_csv_round_trip(self, tmp_path):
        c = estimate_F(poisson(2), np.linspace(0, 2, 9))
        write_curve_csv(tmp_path / "F.csv", c)
        back = read_curve_csv(tmp_path / "F.csv")
        assert back.kind == "F"
        assert back.meta["correction"] == "border"
        assert_array_equal(back.values, c.values)
        assert "r,value" in (tmp_path / "F.csv").read_text().splitlines()

    def test_default_r(self):
        r = default_r_values(Window(0, 8, 0, 4))
        assert len(r) == 64 and r[0] == 0 and r[-1] == 1.0
