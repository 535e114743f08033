"""Spectrogram zeros by the Minimal Grid Neighbors rule."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .patterns import PointPattern, Window
from .stft import Spectrogram

DEFAULT_MARGIN = 3.0


@dataclass(frozen=True)
class ZeroExtractionConfig:
    """``threshold_mode`` is ``"none"`` or ``"relative"``; in relative mode a
    minimum is kept only if it is below ``epsilon`` times the field maximum.
    ``margin`` is removed from every side of the lattice extent."""

    threshold_mode: str = "none"
    epsilon: float = 1e-4
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if self.threshold_mode not in ("none", "relative"):
            raise ValueError(f"unknown threshold mode {self.threshold_mode!r}")
        if self.threshold_mode == "relative" and not 0.0 < self.epsilon < 1.0:
            raise ValueError("relative threshold epsilon must lie in (0, 1)")
        if not self.margin >= 0:
            raise ValueError("margin must be nonnegative")


def local_minima(field: np.ndarray) -> np.ndarray:
    """Boolean mask of interior cells strictly below all 8 neighbours."""
    field = np.asarray(field, dtype=float)
    if field.ndim != 2 or min(field.shape) < 3:
        raise ValueError(f"need a 2-d field of at least 3x3, got shape {field.shape}")
    core = field[1:-1, 1:-1]
    n_rows, n_cols = field.shape
    is_min = np.ones(core.shape, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            neighbour = field[1 + di : n_rows - 1 + di, 1 + dj : n_cols - 1 + dj]
            is_min &= core < neighbour
    mask = np.zeros(field.shape, dtype=bool)
    mask[1:-1, 1:-1] = is_min
    return mask


def shrink_window(w: Window, margin: float) -> Window:
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if 2 * margin >= w.width or 2 * margin >= w.height:
        raise ValueError(f"margin {margin} leaves nothing of window {w}")
    return Window(w.x_min + margin, w.x_max - margin, w.y_min + margin, w.y_max - margin)


def lattice_window(spec: Spectrogram) -> Window:
    """Extent of the lattice in ``omega + i t`` coordinates."""
    g = spec.grid
    om, ts = g.omegas, g.times
    return Window(float(om[0]), float(om[-1]), float(ts[0]), float(ts[-1]))


def extract_zeros_mgn(
    spec: Spectrogram,
    cfg: ZeroExtractionConfig | None = None,
    window: Window | None = None,
) -> PointPattern:
    """Zeros of ``spec`` as a pattern of ``omega + i t`` points.

    ``window`` defaults to the lattice extent; it is shrunk by ``cfg.margin``
    and only minima strictly inside the shrunk window are returned.
    """
    cfg = cfg or ZeroExtractionConfig()
    values = spec.values
    mask = local_minima(values)
    if cfg.threshold_mode == "relative":
        mask &= values < cfg.epsilon * values.max()
    k, l = np.nonzero(mask)
    points = spec.grid.coordinates(k, l)
    base = window if window is not None else lattice_window(spec)
    observed = shrink_window(base, cfg.margin) if cfg.margin > 0 else base
    return PointPattern(points[observed.contains(points, strict=True)], observed)
