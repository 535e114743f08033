import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from tfzeros.patterns import PointPattern, Window, read_pattern_csv, write_pattern_csv
from tfzeros.rng import SeededStream, as_generator, seed_from_env


class TestStreams:
    @given(st.integers(0, 2**64 - 1), st.lists(st.integers(0, 2**31), max_size=4))
    def test_bit_reproducible(self, seed, path):
        a = SeededStream(seed).child(*path).generator().random(5)
        b = SeededStream(seed).child(*path).generator().random(5)
        assert_array_equal(a, b)

    def test_children_differ(self):
        root = SeededStream(1)
        draws = {tuple(root.child(i).generator().integers(0, 2**62, 3)) for i in range(50)}
        assert len(draws) == 50
        assert not np.array_equal(root.generator().random(4), root.child(0).generator().random(4))

    def test_order_independent(self):
        root = SeededStream(9)
        forward = [root.child(i).generator().random() for i in range(10)]
        backward = [root.child(i).generator().random() for i in reversed(range(10))][::-1]
        assert forward == backward

    def test_key(self):
        assert SeededStream(3, 4).key == (4,)
        assert SeededStream(3).child(1, 2).key == (0, 1, 2)

    def test_bad_seed(self):
        with pytest.raises(ValueError):
            SeededStream(-1)

    def test_as_generator(self):
        g = np.random.default_rng(0)
        assert as_generator(g) is g

    def test_env(self, monkeypatch):
        monkeypatch.delenv("TFZEROS_SEED", raising=False)
        assert seed_from_env(7) == 7
        monkeypatch.setenv("TFZEROS_SEED", "12")
        assert seed_from_env() == 12


class TestWindow:
    def test_square(self):
        w = Window.square(2.0, 1 + 1j)
        assert (w.x_min, w.x_max, w.y_min, w.y_max) == (-1.0, 3.0, -1.0, 3.0)
        assert w.area == 16 and w.center == 1 + 1j

    def test_contains(self):
        w = Window(0, 1, 0, 1)
        assert list(w.contains([0.5 + 0.5j, 1 + 0.5j, 2j])) == [True, True, False]
        assert list(w.contains([0.5 + 0.5j, 1 + 0.5j], strict=True)) == [True, False]

    def test_boundary_distance(self):
        w = Window(0, 4, 0, 2)
        assert w.boundary_distance(1 + 0.5j) == pytest.approx(0.5)

    def test_invalid(self):
        with pytest.raises(ValueError):
            Window(1, 0, 0, 1)


class TestPattern:
    def test_rejects_outside_and_duplicates(self):
        w = Window(0, 1, 0, 1)
        with pytest.raises(ValueError):
            PointPattern(np.array([2 + 0j]), w)
        with pytest.raises(ValueError):
            PointPattern(np.array([0.5 + 0.5j, 0.5 + 0.5j]), w)

    def test_intensity_and_restrict(self):
        w = Window(0, 2, 0, 1)
        p = PointPattern(np.array([0.5 + 0.5j, 1.5 + 0.5j]), w)
        assert p.intensity == 1.0
        assert len(p.restrict(Window(0, 1, 0, 1))) == 1

    def test_csv_round_trip(self, tmp_path):
        w = Window(-1.5, 2.25, 0.0, 3.0)
        p = PointPattern(np.array([0.1 + 0.2j, -1.0 + 2.9j, 1 / 3 + 1j / 7]), w)
        write_pattern_csv(tmp_path / "p.csv", p)
        back = read_pattern_csv(tmp_path / "p.csv")
        assert back.window == w
        assert_array_equal(back.points, p.points)
