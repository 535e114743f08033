"""Discrete Fourier / short-time Fourier transforms with the circular Gaussian window.

Conventions: time in seconds, angular frequency in rad/s, and the STFT

    V s(t, w) = sum_j s_j g(t_j - t) exp(-i w t_j) dt

which is the Riemann sum of the continuous transform with the phase taken at
absolute time. Points of the plane are identified with ``z = w + i t``.
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft

from .signals import DiscreteSignal, TimeGrid

WINDOW_TRUNCATION = 1e-12
# Gaussian e^{-t^2/2} drops below WINDOW_TRUNCATION beyond this radius.
WINDOW_RADIUS = math.sqrt(-2.0 * math.log(WINDOW_TRUNCATION))

WINDOW_NORMALIZATIONS = {
    "unit": math.pi**-0.25,  # unit L2 energy
    "inv_sqrt_pi": math.pi**-0.5,
}

_CHUNK_CELLS = 1 << 22


def dft(x) -> np.ndarray:
    """Unnormalized DFT ``X_k = sum_j x_j exp(-2 i pi k j / n)``."""
    x = np.asarray(x, dtype=complex)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("dft needs a nonempty 1-d input")
    return scipy.fft.fft(x)


def gaussian_window(time_grid: TimeGrid, normalization: str = "unit") -> np.ndarray:
    """Samples of the circular Gaussian window at offsets ``m * dt``, ``|m| <= L``.

    The support is symmetric around zero and stops where the window falls
    below ``WINDOW_TRUNCATION`` times its peak.
    """
    try:
        const = WINDOW_NORMALIZATIONS[normalization]
    except KeyError:
        raise ValueError(f"unknown window normalization {normalization!r}") from None
    half = window_half_length(time_grid.dt)
    offsets = time_grid.dt * np.arange(-half, half + 1)
    return const * np.exp(-0.5 * offsets**2)


def window_half_length(dt: float) -> int:
    return int(math.floor(WINDOW_RADIUS / dt))


@dataclass(frozen=True)
class TFGrid:
    """Lattice of STFT evaluation points.

    Frames sit every ``hop`` samples of ``time_grid``; frequencies are
    ``omega_start + l * domega`` with ``domega = 2 pi / (fft_size * dt)``.
    """

    time_grid: TimeGrid
    domega: float
    n_freq: int
    omega_start: float
    hop: int = 1

    def __post_init__(self):
        if self.n_freq < 1 or self.hop < 1:
            raise ValueError("n_freq and hop must be positive")
        ratio = 2 * math.pi / (self.domega * self.time_grid.dt)
        if ratio < 0.5 or abs(ratio - round(ratio)) > 1e-6 * ratio:
            raise ValueError(
                "frequency step must equal 2*pi/(M*dt) for an integer FFT size M"
            )

    @classmethod
    def for_signal(cls, time_grid: TimeGrid) -> "TFGrid":
        """Full-rate lattice: every sample, ``n`` bins covering ``[-pi/dt, pi/dt)``."""
        n = time_grid.n
        domega = 2 * math.pi / (n * time_grid.dt)
        return cls(time_grid, domega, n, -(n // 2) * domega, 1)

    @classmethod
    def with_step(cls, time_grid: TimeGrid, step: float, fast: bool = False) -> "TFGrid":
        """Approximately square lattice with spacing ``step`` in both t and omega.

        ``fast`` rounds the FFT size up to a size with small prime factors,
        making the frequency step slightly finer than ``step``.
        """
        hop = max(1, int(round(step / time_grid.dt)))
        size = max(2, int(round(2 * math.pi / (step * time_grid.dt))))
        if fast:
            size = scipy.fft.next_fast_len(size)
        domega = 2 * math.pi / (size * time_grid.dt)
        return cls(time_grid, domega, size, -(size // 2) * domega, hop)

    @property
    def fft_size(self) -> int:
        return int(round(2 * math.pi / (self.domega * self.time_grid.dt)))

    @property
    def n_time(self) -> int:
        return -(-self.time_grid.n // self.hop)

    @property
    def dt(self) -> float:
        """Spacing between frames."""
        return self.hop * self.time_grid.dt

    @property
    def times(self) -> np.ndarray:
        return self.time_grid.t_start + self.dt * np.arange(self.n_time)

    @property
    def omegas(self) -> np.ndarray:
        return self.omega_start + self.domega * np.arange(self.n_freq)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_time, self.n_freq)

    def mirror_index(self, l):
        """Index of the bin at ``-omega_l`` (requires a symmetric frequency lattice)."""
        twice = 2 * self.omega_start / self.domega
        if abs(twice - round(twice)) > 1e-9:
            raise ValueError("frequency lattice is not symmetric about zero")
        return (-np.asarray(l) - int(round(twice))) % self.fft_size

    def coordinates(self, k, l) -> np.ndarray:
        """Complex coordinates ``omega + i t`` of lattice nodes ``(k, l)``."""
        return (self.omega_start + self.domega * np.asarray(l)) + 1j * (
            self.time_grid.t_start + self.dt * np.asarray(k)
        )


@dataclass(frozen=True, eq=False)
class TFMatrix:
    grid: TFGrid
    values: np.ndarray
    border: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "values", values)
        if self.border is None:
            object.__setattr__(self, "border", np.zeros(self.grid.n_time, dtype=bool))


@dataclass(frozen=True, eq=False)
class Spectrogram:
    grid: TFGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {self.grid.shape}")
        if values.size and values.min() < 0:
            raise ValueError("spectrogram values must be nonnegative")
        object.__setattr__(self, "values", values)


def _border_frames(grid: TFGrid, window: np.ndarray) -> np.ndarray:
    """Frames whose window puts more than half its energy outside the signal."""
    half = (len(window) - 1) // 2
    energy = np.concatenate([[0.0], np.cumsum(window**2)])
    centers = grid.hop * np.arange(grid.n_time)
    lo = np.clip(half - centers, 0, len(window))
    hi = np.clip(half + grid.time_grid.n - centers, 0, len(window))
    inside = energy[hi] - energy[lo]
    return inside < 0.5 * energy[-1]


def _stft_rows(samples: np.ndarray, grid: TFGrid, normalization: str, phase: bool = True):
    """Yield ``(frame_slice, complex block)`` covering all frames.

    With ``phase=False`` the blocks are only correct in modulus.
    """
    tg = grid.time_grid
    window = gaussian_window(tg, normalization)
    half = (len(window) - 1) // 2
    size = grid.fft_size
    offsets = np.arange(-half, half + 1)
    # demodulate by omega_start so bin l of a size-M FFT lands on omega_l
    taper = window * np.exp(-1j * grid.omega_start * offsets * tg.dt)
    padded = np.concatenate([np.zeros(half, complex), samples, np.zeros(half, complex)])
    segments = np.lib.stride_tricks.sliding_window_view(padded, len(window))[:: grid.hop]
    wraps = -(-len(window) // size)
    bins = np.arange(grid.n_freq) % size
    omegas = grid.omegas
    frame_times = grid.times
    rows = max(1, _CHUNK_CELLS // max(size, len(window)))
    for start in range(0, grid.n_time, rows):
        stop = min(grid.n_time, start + rows)
        buf = np.zeros((stop - start, wraps * size), dtype=complex)
        buf[:, : len(window)] = segments[start:stop] * taper
        folded = buf.reshape(stop - start, wraps, size).sum(axis=1)
        if not phase:
            # a circular shift only changes the phase of the spectrum
            yield slice(start, stop), tg.dt * scipy.fft.fft(folded, axis=1)[:, bins]
            continue
        # offset m = j - half lands on FFT position (m mod M)
        folded = np.roll(folded, -half, axis=1)
        spectrum = scipy.fft.fft(folded, axis=1)[:, bins]
        factor = np.exp(-1j * np.outer(frame_times[start:stop], omegas))
        yield slice(start, stop), tg.dt * factor * spectrum


def stft(s: DiscreteSignal, grid: TFGrid, normalization: str = "unit") -> TFMatrix:
    """Gaussian-window STFT of ``s`` on ``grid`` via windowed FFTs per frame."""
    if s.grid != grid.time_grid:
        raise ValueError("signal grid does not match the TF grid's time grid")
    out = np.empty(grid.shape, dtype=complex)
    for rows, block in _stft_rows(s.samples, grid, normalization):
        out[rows] = block
    border = _border_frames(grid, gaussian_window(grid.time_grid, normalization))
    return TFMatrix(grid, out, border)


def spectrogram(v: TFMatrix) -> Spectrogram:
    return Spectrogram(v.grid, np.abs(v.values) ** 2)


def spectrogram_of(s: DiscreteSignal, grid: TFGrid, normalization: str = "unit") -> Spectrogram:
    """Same as ``spectrogram(stft(s, grid))`` without keeping the complex matrix."""
    if s.grid != grid.time_grid:
        raise ValueError("signal grid does not match the TF grid's time grid")
    out = np.empty(grid.shape)
    for rows, block in _stft_rows(s.samples, grid, normalization, phase=False):
        out[rows] = block.real**2 + block.imag**2
    return Spectrogram(grid, out)


def hermite_spectrogram_oracle(k: int, t, omega):
    """Closed-form Gaussian spectrogram of the Hermite function ``h_k``.

    ``(t^2 + w^2)^k exp(-(t^2 + w^2)/2) / (2^k k!)``, evaluated in log space.
    """
    if k < 0:
        raise ValueError("Hermite order must be nonnegative")
    r2 = np.asarray(t, dtype=float) ** 2 + np.asarray(omega, dtype=float) ** 2
    if k == 0:
        out = np.exp(-0.5 * r2)
    else:
        with np.errstate(divide="ignore"):
            log_val = k * np.log(r2) - 0.5 * r2 - k * math.log(2.0) - math.lgamma(k + 1)
        out = np.exp(log_val)
    return float(out) if np.ndim(out) == 0 else out


def stft_at(s: DiscreteSignal, t: float, omega: float, normalization: str = "unit") -> complex:
    """STFT at an arbitrary ``(t, omega)`` by direct quadrature (no grid snapping)."""
    tj = s.times
    g = WINDOW_NORMALIZATIONS[normalization] * np.exp(-0.5 * (tj - t) ** 2)
    return complex(np.sum(s.samples * g * np.exp(-1j * omega * tj)) * s.grid.dt)


def bargmann(s: DiscreteSignal, z: complex) -> complex:
    """Bargmann transform ``B s(z)`` recovered from the Gaussian STFT.

    With the transform convention of this module,
    ``V s(t, w) = exp(-|zeta|^2/4 - i w t/2) B s(-i zeta / sqrt 2)`` where
    ``zeta = w + i t``; the STFT is evaluated by direct quadrature at
    ``zeta = i sqrt(2) z``.
    """
    zeta = 1j * math.sqrt(2.0) * complex(z)
    omega, t = zeta.real, zeta.imag
    tg = s.grid
    margin = WINDOW_RADIUS + 1.0
    if not (tg.t_start + margin <= t <= tg.t_end - margin):
        raise ValueError(f"z={z} maps to t={t:.3g}, outside the signal's resolvable span")
    if abs(omega) + margin > math.pi / tg.dt:
        raise ValueError(f"z={z} maps to omega={omega:.3g}, beyond the resolvable band")
    v = stft_at(s, t, omega)
    return v * np.exp(abs(zeta) ** 2 / 4 + 0.5j * omega * t)


def write_tf_csv(path, tf: TFMatrix | Spectrogram) -> None:
    grid = tf.grid
    tt, ww = np.meshgrid(grid.times, grid.omegas, indexing="ij")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if isinstance(tf, TFMatrix):
            writer.writerow(["t", "omega", "re", "im"])
            for t, w, v in zip(tt.ravel(), ww.ravel(), tf.values.ravel()):
                writer.writerow([f"{t:.17g}", f"{w:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
        else:
            writer.writerow(["t", "omega", "value"])
            for t, w, v in zip(tt.ravel(), ww.ravel(), tf.values.ravel()):
                writer.writerow([f"{t:.17g}", f"{w:.17g}", f"{v:.17g}"])


_HEADER = struct.Struct("<QQdddd")


def write_tf_binary(path, tf: TFMatrix | Spectrogram) -> None:
    """Little-endian header ``(n_time, n_freq, t_start, dt, omega_start, domega)``
    followed by row-major float64 values (complex entries as re, im pairs)."""
    g = tf.grid
    header = _HEADER.pack(
        g.n_time, g.n_freq, g.time_grid.t_start, g.dt, g.omega_start, g.domega
    )
    if isinstance(tf, TFMatrix):
        payload = np.ascontiguousarray(tf.values, dtype="<c16").view("<f8")
    else:
        payload = np.ascontiguousarray(tf.values, dtype="<f8")
    with Path(path).open("wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_tf_binary(path) -> TFMatrix | Spectrogram:
    """Inverse of :func:`write_tf_binary`; complex vs real is inferred from size.

    The header stores the frame step only, so the sample step is recovered as
    the largest divisor ``dt / hop`` compatible with the frequency step.
    """
    raw = Path(path).read_bytes()
    n_time, n_freq, t_start, dt, omega_start, domega = _HEADER.unpack_from(raw)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    base = 2 * math.pi / (domega * dt)
    hop = next(
        (h for h in range(1, 1025) if abs(h * base - round(h * base)) <= 1e-6 * h * base),
        None,
    )
    if hop is None:
        raise ValueError("header time and frequency steps are incompatible")
    tg = TimeGrid(t_start, dt / hop, max(int(n_time) * hop, 2))
    grid = TFGrid(tg, domega, int(n_freq), omega_start, hop)
    cells = int(n_time) * int(n_freq)
    if body.size == 2 * cells:
        values = body.view("<c16").reshape(int(n_time), int(n_freq))
        return TFMatrix(grid, values.astype(complex))
    if body.size == cells:
        return Spectrogram(grid, body.reshape(int(n_time), int(n_freq)).astype(float))
    raise ValueError("binary TF payload size does not match its header")
