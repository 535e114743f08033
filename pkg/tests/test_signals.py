import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from tfzeros.rng import SeededStream
from tfzeros.signals import (
    ChirpParams,
    DiscreteSignal,
    TimeGrid,
    WaveParams,
    chirp_frequency,
    chirp_phase,
    gen_chirp,
    gen_sine,
    gen_wave,
    hermite,
    hermite_functions,
    mix,
    read_signal_csv,
    sample_discrete_white_noise,
    sample_truncated_white_noise,
    wave_frequency,
    write_signal_csv,
)
from tfzeros.stft import dft


def rodrigues(k, t):
    """h_k from the Rodrigues formula, evaluated symbolically."""
    x = sympy.Symbol("x")
    poly = sympy.diff(sympy.exp(-(x**2)), x, k) * sympy.exp(x**2)
    f = sympy.lambdify(x, sympy.simplify(poly), "numpy")
    c = (-1) ** k / math.sqrt(2**k * math.factorial(k) * math.sqrt(math.pi))
    return c * np.exp(-(t**2) / 2) * np.broadcast_to(f(t), np.shape(t))


class TestTimeGrid:
    def test_sample_positions(self):
        g = TimeGrid(-1.0, 0.25, 9)
        assert_allclose(g.times, np.arange(9) * 0.25 - 1.0)
        assert g.t_end == pytest.approx(1.0)

    @pytest.mark.parametrize("n,dt", [(1, 0.1), (0, 0.1), (10, 0.0), (10, -1.0)])
    def test_invalid(self, n, dt):
        with pytest.raises(ValueError):
            TimeGrid(0.0, dt, n)

    def test_symmetric(self):
        g = TimeGrid.symmetric(4096, 64.0)
        assert g.dt == pytest.approx(1 / 32)
        assert g.t_start == -64.0

    def test_length_checked(self):
        with pytest.raises(ValueError):
            DiscreteSignal(TimeGrid(0, 1, 4), np.zeros(5))


class TestSine:
    def test_zero_at_origin(self):
        g = TimeGrid(-2.0, 0.5, 9)
        s = gen_sine(1.0, 3.3, g)
        assert s.samples[4] == 0
        assert np.all(s.samples.imag == 0)

    def test_negative_amplitude(self):
        with pytest.raises(ValueError):
            gen_sine(-1.0, 1.0, TimeGrid(0, 1, 4))

    def test_dft_two_bins(self):
        n, dt = 128, 0.1
        g = TimeGrid(0.0, dt, n)
        omega = 2 * math.pi * 5 / (n * dt)
        spectrum = np.abs(dft(gen_sine(1.0, omega, g).samples))
        top = set(np.argsort(spectrum)[-2:])
        assert top == {5, n - 5}
        assert_allclose(np.delete(spectrum, [5, n - 5]), 0, atol=1e-10)


class TestChirp:
    p = ChirpParams(omega1=2.0, omega2=8.0, T=10.0)

    def test_zero_outside_support(self):
        g = TimeGrid(-20.0, 0.05, 800)
        s = gen_chirp(self.p, g)
        assert np.all(s.samples[np.abs(g.times) >= 10.0] == 0)

    def test_endpoint_frequencies(self):
        assert chirp_frequency(self.p, -10.0) == pytest.approx(2.0)
        assert chirp_frequency(self.p, 10.0) == pytest.approx(8.0)

    def test_phase_derivative_is_frequency(self):
        t = np.linspace(-9, 9, 50)
        h = 1e-5
        num = (chirp_phase(self.p, t + h) - chirp_phase(self.p, t - h)) / (2 * h)
        assert_allclose(num, chirp_frequency(self.p, t), rtol=1e-7)

    def test_spectrogram_ridge_increases(self):
        from tfzeros.stft import TFGrid, spectrogram_of

        g = TimeGrid.symmetric(1024, 16.0)
        s = gen_chirp(ChirpParams(5.0, 40.0, 16.0), g)
        spec = spectrogram_of(s, TFGrid.with_step(g, 0.25))
        om = spec.grid.omegas
        frames = np.searchsorted(spec.grid.times, [-10.0, -5.0, 0.0, 5.0, 10.0])
        ridge = [om[np.argmax(np.where(om > 0, spec.values[f], 0))] for f in frames]
        assert np.all(np.diff(ridge) > 0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ChirpParams(0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            ChirpParams(1.0, 1.0, -1.0)


class TestWave:
    p = WaveParams(C=2.0, d=5.0, phi=0.3, t0=1.0)

    def test_zero_after_collapse(self):
        g = TimeGrid(-3.0, 0.5, 13)  # contains t0 exactly
        s = gen_wave(self.p, g)
        assert np.all(s.samples[g.times >= 1.0] == 0)
        assert np.all(np.isfinite(s.samples))

    def test_unit_offset_amplitude(self):
        g = TimeGrid(0.0, 0.5, 4)
        s = gen_wave(WaveParams(C=2.0, d=5.0, phi=0.0, t0=1.0), g)
        assert s.samples[0].real == pytest.approx(2.0 * math.cos(5.0))

    def test_frequency_matches_phase_derivative(self):
        t = np.linspace(-5, 0.9, 30)
        h = 1e-6
        phase = lambda u: self.p.d * (self.p.t0 - u) ** 0.625  # noqa: E731
        num = np.abs(phase(t + h) - phase(t - h)) / (2 * h)
        assert_allclose(wave_frequency(self.p, t), num, rtol=1e-6)
        assert wave_frequency(self.p, 0.999) > wave_frequency(self.p, 0.9)

    def test_invalid(self):
        with pytest.raises(ValueError):
            WaveParams(1.0, 1.0, 7.0, 0.0)


class TestHermite:
    def test_values(self):
        assert hermite(1, 0.0) == 0.0
        assert hermite(0, 0.0) == pytest.approx(math.pi**-0.25)

    @pytest.mark.parametrize("k", range(11))
    def test_matches_rodrigues(self, k):
        t = np.linspace(-5, 5, 41)
        ref = rodrigues(k, t)
        mask = np.abs(ref) > 1e-300
        assert_allclose(hermite(k, t)[mask], ref[mask], rtol=1e-10, atol=1e-14)

    def test_gram_identity(self):
        t = np.linspace(-15, 15, 6001)
        h = hermite_functions(9, t)
        gram = np.trapezoid(h[:, None, :] * h[None, :, :], t, axis=-1)
        assert_allclose(gram, np.eye(10), atol=1e-6)

    def test_high_order_finite(self):
        t = np.linspace(-300, 300, 101)
        h = hermite(20000, t)
        assert np.all(np.isfinite(h))
        # bulk of h_k lives in |t| < sqrt(2k), where it is O(k^{-1/4})
        assert np.abs(h).max() < 1.0

    def test_order_limit(self):
        with pytest.raises(ValueError):
            hermite(200_000, 0.0)
        with pytest.raises(ValueError):
            hermite(-1, 0.0)


class TestNoise:
    def test_moments(self):
        xi = sample_discrete_white_noise(100_000, SeededStream(1))
        assert abs(xi.mean()) < 4 / math.sqrt(1e5)
        assert np.mean(np.abs(xi) ** 2) == pytest.approx(1.0, rel=0.02)
        # var of each part is 1/2; sd of the sample variance is ~ sqrt(2/n)/2
        band = 3 * math.sqrt(2 / 1e5) / 2
        assert abs(xi.real.var() - 0.5) < band
        assert abs(xi.imag.var() - 0.5) < band

    def test_reproducible(self):
        a = sample_discrete_white_noise(64, SeededStream(5, 3))
        b = sample_discrete_white_noise(64, SeededStream(5, 3))
        c = sample_discrete_white_noise(64, SeededStream(5, 4))
        assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_flat_dft_profile(self):
        n = 64
        prof = np.mean(
            [np.abs(dft(sample_discrete_white_noise(n, SeededStream(2, i)))) ** 2 for i in range(2000)],
            axis=0,
        )
        assert_allclose(prof, n, rtol=0.15)

    def test_truncated_single_term(self):
        g = TimeGrid.symmetric(64, 6.0)
        s = sample_truncated_white_noise(0, g, SeededStream(9))
        xi0 = sample_discrete_white_noise(1, SeededStream(9))[0]
        assert_allclose(s.samples, xi0 * hermite(0, g.times))

    def test_truncated_pointwise_variance(self):
        g = TimeGrid.symmetric(16, 3.0)
        draws = np.array(
            [sample_truncated_white_noise(5, g, SeededStream(4, i)).samples for i in range(4000)]
        )
        expected = np.sum(hermite_functions(5, g.times) ** 2, axis=0)
        assert_allclose(np.mean(np.abs(draws) ** 2, axis=0), expected, rtol=0.1)


class TestMix:
    g = TimeGrid.symmetric(128, 8.0)

    def template(self):
        return gen_chirp(ChirpParams(2.0, 6.0, 6.0), self.g)

    def test_zero_snr_is_noise(self):
        xi = sample_discrete_white_noise(self.g.n, SeededStream(0))
        assert_array_equal(mix(self.template(), xi, 0.0).samples, xi)

    def test_infinite_snr_is_signal(self):
        xi = sample_discrete_white_noise(self.g.n, SeededStream(0))
        y = mix(self.template(), xi, math.inf)
        assert_allclose(y.samples, self.template().normalized().samples)
        assert y.energy == pytest.approx(1.0)

    @given(a=st.floats(0, 50), b=st.floats(0, 50))
    @settings(max_examples=40, deadline=None)
    def test_linear_in_snr(self, a, b):
        s = self.template()
        xi = sample_discrete_white_noise(self.g.n, SeededStream(1))
        diff = mix(s, xi, a + b).samples - mix(s, xi, a).samples
        assert_allclose(diff, b * s.normalized().samples, atol=1e-12 * (1 + a + b))

    def test_grid_mismatch(self):
        other = DiscreteSignal(TimeGrid.symmetric(128, 9.0), np.zeros(128))
        with pytest.raises(ValueError):
            mix(self.template(), other, 1.0)
        with pytest.raises(ValueError):
            mix(self.template(), np.zeros(127), 1.0)


class TestCsv:
    def test_round_trip(self, tmp_path):
        g = TimeGrid(-1.3, 0.0137, 50)
        xi = sample_discrete_white_noise(50, SeededStream(8))
        s = DiscreteSignal(g, xi)
        write_signal_csv(tmp_path / "s.csv", s)
        back = read_signal_csv(tmp_path / "s.csv")
        assert_array_equal(back.samples, s.samples)
        assert_allclose(back.times, s.times, atol=1e-12)
        assert (tmp_path / "s.csv").read_text().splitlines()[0] == "t,re,im"
