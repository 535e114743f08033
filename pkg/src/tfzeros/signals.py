"""Template signals, Hermite functions and complex white noise on a time grid."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import SeededStream, as_generator

#: Largest Hermite order accepted by :func:`hermite_functions`.
HERMITE_MAX_ORDER = 100_000

_RESCALE = 1e150
_LOG_RESCALE = math.log(_RESCALE)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling ``t_k = t_start + k * dt`` for ``k = 0 .. n-1``."""

    t_start: float
    dt: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"a time grid needs n >= 2 samples, got {self.n}")
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")

    @classmethod
    def symmetric(cls, n: int, half_duration: float) -> "TimeGrid":
        """``n`` samples covering ``[-half_duration, half_duration)``."""
        dt = 2.0 * half_duration / n
        return cls(-float(half_duration), dt, int(n))

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n)

    @property
    def t_end(self) -> float:
        return self.t_start + (self.n - 1) * self.dt

    def index_of(self, t: float) -> int:
        return int(round((t - self.t_start) / self.dt))


@dataclass(frozen=True, eq=False)
class DiscreteSignal:
    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.shape != (self.grid.n,):
            raise ValueError(
                f"expected {self.grid.n} samples, got array of shape {samples.shape}"
            )
        object.__setattr__(self, "samples", samples)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def energy(self) -> float:
        """Riemann approximation of the L2 energy, ``sum |s_k|^2 dt``."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dt)

    def normalized(self) -> "DiscreteSignal":
        energy = self.energy
        if energy == 0.0:
            raise ValueError("cannot normalize a signal with zero energy")
        return DiscreteSignal(self.grid, self.samples / math.sqrt(energy))

    def __eq__(self, other):
        if not isinstance(other, DiscreteSignal):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.samples, other.samples)


@dataclass(frozen=True)
class ChirpParams:
    """Linear chirp sweeping ``omega1 -> omega2`` over ``[-T, T]``.

    The envelope is flat on ``[-taper_start*T, taper_start*T]`` and decays to
    zero at ``+-T`` with a raised cosine.
    """

    omega1: float
    omega2: float
    T: float
    taper_start: float = 0.8

    def __post_init__(self):
        if not (self.omega1 > 0 and self.omega2 > 0):
            raise ValueError("chirp frequencies must be positive")
        if not self.T > 0:
            raise ValueError("chirp half support T must be positive")
        if not 0.0 <= self.taper_start < 1.0:
            raise ValueError("taper_start must lie in [0, 1)")


@dataclass(frozen=True)
class WaveParams:
    C: float
    d: float
    phi: float
    t0: float

    def __post_init__(self):
        if not (self.C > 0 and self.d > 0):
            raise ValueError("wave amplitude C and constant d must be positive")
        if not 0.0 <= self.phi < 2 * math.pi:
            raise ValueError("phase phi must lie in [0, 2*pi)")


def gen_sine(A: float, omega: float, grid: TimeGrid) -> DiscreteSignal:
    if A < 0:
        raise ValueError("sine amplitude must be nonnegative")
    return DiscreteSignal(grid, A * np.sin(omega * grid.times))


def chirp_envelope(p: ChirpParams, t) -> np.ndarray:
    x = np.abs(np.asarray(t, dtype=float)) / p.T
    a = p.taper_start
    taper = 0.5 * (1.0 + np.cos(np.pi * (x - a) / (1.0 - a)))
    return np.where(x <= a, 1.0, np.where(x < 1.0, taper, 0.0))


def chirp_frequency(p: ChirpParams, t) -> np.ndarray:
    """Instantaneous angular frequency, linear from ``omega1`` to ``omega2``."""
    t = np.asarray(t, dtype=float)
    return p.omega1 + (p.omega2 - p.omega1) * (t + p.T) / (2.0 * p.T)


def chirp_phase(p: ChirpParams, t) -> np.ndarray:
    # antiderivative of chirp_frequency, zero at t = -T
    u = np.asarray(t, dtype=float) + p.T
    return p.omega1 * u + (p.omega2 - p.omega1) * u**2 / (4.0 * p.T)


def gen_chirp(p: ChirpParams, grid: TimeGrid) -> DiscreteSignal:
    t = grid.times
    return DiscreteSignal(grid, chirp_envelope(p, t) * np.sin(chirp_phase(p, t)))


def gen_wave(p: WaveParams, grid: TimeGrid) -> DiscreteSignal:
    """Singular chirp collapsing at ``t0``; samples at or after ``t0`` are zero."""
    t = grid.times
    before = t < p.t0
    lag = np.where(before, p.t0 - t, 1.0)
    values = p.C * lag**-0.25 * np.cos(p.d * lag**0.625 + p.phi)
    return DiscreteSignal(grid, np.where(before, values, 0.0))


def wave_frequency(p: WaveParams, t) -> np.ndarray:
    """Magnitude of the phase derivative, ``(5d/8) (t0 - t)^(-3/8)`` for ``t < t0``."""
    t = np.asarray(t, dtype=float)
    lag = np.where(t < p.t0, p.t0 - t, np.nan)
    return 0.625 * p.d * lag**-0.375


def _hermite_rows(kmax: int, t: np.ndarray):
    """Yield ``h_0(t), h_1(t), ..., h_kmax(t)``.

    Normalized three-term recurrence carried with a per-sample log scale so
    that neither the Gaussian factor nor the polynomial growth under/overflows.
    """
    if kmax < 0:
        raise ValueError("Hermite order must be nonnegative")
    if kmax > HERMITE_MAX_ORDER:
        raise ValueError(
            f"Hermite order {kmax} exceeds the supported maximum {HERMITE_MAX_ORDER}"
        )
    t = np.asarray(t, dtype=float)
    log_scale = -0.5 * t**2
    prev = np.zeros_like(t)
    cur = np.full_like(t, math.pi**-0.25)
    yield cur * np.exp(log_scale)
    for k in range(kmax):
        nxt = math.sqrt(2.0 / (k + 1)) * t * cur - math.sqrt(k / (k + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE
        if big.any():
            cur = np.where(big, cur / _RESCALE, cur)
            prev = np.where(big, prev / _RESCALE, prev)
            log_scale = np.where(big, log_scale + _LOG_RESCALE, log_scale)
        yield cur * np.exp(log_scale)


def hermite_functions(kmax: int, t) -> np.ndarray:
    """Array of shape ``(kmax + 1,) + shape(t)`` holding ``h_0 .. h_kmax``."""
    t = np.asarray(t, dtype=float)
    out = np.empty((kmax + 1,) + t.shape)
    for k, row in enumerate(_hermite_rows(kmax, t.ravel())):
        out[k] = row.reshape(t.shape)
    return out


def hermite(k: int, t):
    """L2-normalized Hermite function of order ``k``.

    >>> round(float(hermite(0, 0.0)), 4)
    0.7511
    """
    t_arr = np.asarray(t, dtype=float)
    value = None
    for value in _hermite_rows(k, t_arr.ravel()):
        pass
    value = value.reshape(t_arr.shape)
    return float(value) if value.ndim == 0 else value


def sample_discrete_white_noise(n: int, rng: SeededStream | np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. standard complex Gaussians ``(x + iy) / sqrt(2)``."""
    if n < 1:
        raise ValueError("need at least one noise sample")
    gen = as_generator(rng)
    xy = gen.standard_normal((2, n))
    return (xy[0] + 1j * xy[1]) / math.sqrt(2.0)


def sample_truncated_white_noise(
    n_terms: int, grid: TimeGrid, rng: SeededStream | np.random.Generator
) -> DiscreteSignal:
    """Random Hermite series ``sum_{j=0}^{n_terms} xi_j h_j`` sampled on ``grid``."""
    if n_terms < 0:
        raise ValueError("n_terms must be nonnegative")
    coeffs = sample_discrete_white_noise(n_terms + 1, rng)
    acc = np.zeros(grid.n, dtype=complex)
    for xi, row in zip(coeffs, _hermite_rows(n_terms, grid.times)):
        acc += xi * row
    return DiscreteSignal(grid, acc)


def mix(s: DiscreteSignal, noise, snr: float, normalize: bool = True) -> DiscreteSignal:
    """Signal-plus-noise observation ``snr * s + noise``.

    ``s`` is scaled to unit energy first unless ``normalize`` is false.
    ``snr = inf`` returns the (normalized) signal without noise.
    """
    if snr < 0 or math.isnan(snr):
        raise ValueError("snr must be nonnegative")
    if isinstance(noise, DiscreteSignal):
        if noise.grid != s.grid:
            raise ValueError("signal and noise live on different time grids")
        noise = noise.samples
    noise = np.asarray(noise, dtype=complex)
    if noise.shape != s.samples.shape:
        raise ValueError("signal and noise lengths differ")
    clean = s.normalized() if normalize else s
    if math.isinf(snr):
        return clean
    return DiscreteSignal(s.grid, snr * clean.samples + noise)


def write_signal_csv(path, signal: DiscreteSignal) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "re", "im"])
        for t, v in zip(signal.times, signal.samples):
            writer.writerow([f"{t:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])


def read_signal_csv(path) -> DiscreteSignal:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    if len(t) < 2:
        raise ValueError("a signal file needs at least two rows")
    dt = float(np.mean(np.diff(t)))
    grid = TimeGrid(float(t[0]), dt, len(t))
    if not np.allclose(grid.times, t, rtol=0, atol=1e-9 * max(1.0, abs(t).max())):
        raise ValueError("signal times are not uniformly spaced")
    return DiscreteSignal(grid, data[:, 1] + 1j * data[:, 2])
