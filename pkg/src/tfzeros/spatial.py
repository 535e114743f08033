"""Second-order and empty-space summaries of planar point patterns.

All estimators work on rectangular windows and use the translation edge
correction ``|W intersect (W + v)| = (a - |v_x|)(b - |v_y|)`` for pair
statistics and the reduced-sample (border) correction for ``F``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .patterns import PointPattern, Window

KINDS = ("K", "L", "F", "pcf")
DEFAULT_R_POINTS = 64
PCF_BANDWIDTH_CONSTANT = 0.15

__all__ = [
    "SummaryCurve",
    "default_r_values",
    "estimate_K_L",
    "estimate_K",
    "estimate_F",
    "estimate_pcf",
    "count_variance",
    "poisson_K",
    "poisson_L",
    "poisson_F",
    "write_curve_csv",
    "read_curve_csv",
]


@dataclass(frozen=True, eq=False)
class SummaryCurve:
    r_values: np.ndarray
    values: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.asarray(self.r_values, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float).ravel()
        if self.kind not in KINDS:
            raise ValueError(f"unknown summary kind {self.kind!r}")
        if r.shape != v.shape:
            raise ValueError("r_values and values differ in length")
        if len(r) and (r[0] < 0 or np.any(np.diff(r) <= 0)):
            raise ValueError("r_values must be nonnegative and strictly increasing")
        object.__setattr__(self, "r_values", r)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self) -> int:
        return len(self.r_values)

    def same_grid(self, other: "SummaryCurve") -> bool:
        return len(self) == len(other) and np.array_equal(self.r_values, other.r_values)


def default_r_values(window: Window, n: int = DEFAULT_R_POINTS) -> np.ndarray:
    """``n`` distances from 0 to a quarter of the shorter window side."""
    return np.linspace(0.0, 0.25 * min(window.width, window.height), n)


def _check_r(r_values, window: Window) -> np.ndarray:
    r = np.asarray(r_values, dtype=float).ravel()
    if len(r) == 0:
        raise ValueError("empty r grid")
    if r[0] < 0 or np.any(np.diff(r) <= 0):
        raise ValueError("r_values must be nonnegative and strictly increasing")
    if r[-1] >= 0.5 * min(window.width, window.height):
        raise ValueError(
            f"r up to {r[-1]:.4g} is too large for a {window.width:.4g} x "
            f"{window.height:.4g} window (limit: half the shorter side)"
        )
    return r


def _translation_pairs(p: PointPattern, r_max: float):
    """Distances of unordered pairs closer than ``r_max`` and their edge weights."""
    xy = p.xy
    tree = cKDTree(xy)
    pairs = tree.query_pairs(r_max, output_type="ndarray")
    if len(pairs) == 0:
        return np.empty(0), np.empty(0)
    v = xy[pairs[:, 0]] - xy[pairs[:, 1]]
    d = np.hypot(v[:, 0], v[:, 1])
    w = p.window
    weight = 1.0 / ((w.width - np.abs(v[:, 0])) * (w.height - np.abs(v[:, 1])))
    return d, weight


def _lambda2(p: PointPattern) -> float:
    n = len(p)
    return n * (n - 1) / p.window.area**2


def estimate_K(p: PointPattern, r_values) -> SummaryCurve:
    """Translation-corrected Ripley ``K``; pairs count when ``|z - z'| < r``."""
    if len(p) < 2:
        raise ValueError("K needs at least two points")
    r = _check_r(r_values, p.window)
    d, weight = _translation_pairs(p, float(r[-1]) + 1e-12)
    order = np.argsort(d)
    d, weight = d[order], weight[order]
    cum = np.concatenate([[0.0], np.cumsum(2.0 * weight)])  # ordered pairs
    k = cum[np.searchsorted(d, r, side="left")] / _lambda2(p)
    return SummaryCurve(r, k, "K", {"estimator": "K", "correction": "translation"})


def estimate_K_L(p: PointPattern, r_values) -> tuple[SummaryCurve, SummaryCurve]:
    k = estimate_K(p, r_values)
    l_curve = SummaryCurve(
        k.r_values, np.sqrt(k.values / math.pi), "L",
        {"estimator": "L", "correction": "translation"},
    )
    return k, l_curve


def query_grid(window: Window, spacing: float | None = None) -> np.ndarray:
    """Cell centres of a regular lattice on ``window`` (symmetric about its centre)."""
    if spacing is None:
        spacing = min(window.width, window.height) / 100.0
    if not spacing > 0:
        raise ValueError("query spacing must be positive")
    nx = max(1, int(round(window.width / spacing)))
    ny = max(1, int(round(window.height / spacing)))
    xs = window.x_min + (np.arange(nx) + 0.5) * (window.width / nx)
    ys = window.y_min + (np.arange(ny) + 0.5) * (window.height / ny)
    return (xs[None, :] + 1j * ys[:, None]).ravel()


def estimate_F(p: PointPattern, r_values, query_spacing: float | None = None) -> SummaryCurve:
    """Empty-space function with reduced-sample border correction.

    At level ``r`` only query points at least ``r`` away from the boundary
    contribute. The raw border estimate can wiggle downward between r values,
    so a running maximum is applied to keep the curve a distribution function.
    """
    if len(p) < 1:
        raise ValueError("F needs a nonempty pattern")
    r = _check_r(r_values, p.window)
    q = query_grid(p.window, query_spacing)
    # distances beyond r_max come back as inf, which is all F needs
    dist, _ = cKDTree(p.xy).query(
        np.column_stack([q.real, q.imag]), distance_upper_bound=float(r[-1]) * (1 + 1e-12) + 1e-300
    )
    border = p.window.boundary_distance(q)
    eligible = len(q) - np.searchsorted(np.sort(border), r, side="left")
    near = dist <= r[-1]
    d_near, b_near = dist[near], border[near]
    hits = np.empty(len(r))
    step = max(1, (1 << 22) // max(1, len(d_near)))
    for i in range(0, len(r), step):
        rr = r[i : i + step, None]
        hits[i : i + step] = np.count_nonzero((d_near <= rr) & (b_near >= rr), axis=1)
    f = np.divide(hits, eligible, out=np.zeros(len(r)), where=eligible > 0)
    f[r <= 0] = 0.0
    f = np.maximum.accumulate(f)
    return SummaryCurve(r, f, "F", {"estimator": "F", "correction": "border"})


def default_bandwidth(p: PointPattern) -> float:
    return PCF_BANDWIDTH_CONSTANT / math.sqrt(p.intensity)


def estimate_pcf(p: PointPattern, r_values, bandwidth: float | None = None) -> SummaryCurve:
    """Epanechnikov-smoothed, translation-corrected pair correlation.

    ``g(r) = sum_{i != j} k_h(r - d_ij) / (2 pi d_ij |W cap W_v|) / lambda2``,
    where ``h`` is the kernel half-width.
    """
    if len(p) < 2:
        raise ValueError("pcf needs at least two points")
    r = _check_r(r_values, p.window)
    h = default_bandwidth(p) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    d, weight = _translation_pairs(p, float(r[-1]) + h)
    g = np.zeros(len(r))
    if len(d):
        keep = d > 0
        d, weight = d[keep], weight[keep]
        contrib = 2.0 * weight / (2 * math.pi * d)
        for i, rr in enumerate(r):
            u = (rr - d) / h
            inside = np.abs(u) < 1
            g[i] = np.sum(0.75 / h * (1 - u[inside] ** 2) * contrib[inside])
    g /= _lambda2(p)
    return SummaryCurve(
        r, g, "pcf",
        {"estimator": "pcf", "correction": "translation", "kernel": "epanechnikov",
         "bandwidth": h},
    )


def count_variance(patterns, r: float, min_patterns: int = 30) -> tuple[float, float]:
    """Sample mean and (ddof=1) variance of counts in the disk of radius ``r``
    centred in each pattern's window."""
    patterns = list(patterns)
    if len(patterns) < min_patterns:
        raise ValueError(f"need at least {min_patterns} patterns, got {len(patterns)}")
    counts = []
    for p in patterns:
        w = p.window
        c = w.center
        if r > 0.5 * min(w.width, w.height):
            raise ValueError(f"disk of radius {r} is not contained in window {w}")
        counts.append(np.count_nonzero(np.abs(p.points - c) <= r))
    counts = np.asarray(counts, dtype=float)
    return float(counts.mean()), float(counts.var(ddof=1))


def poisson_K(r):
    return math.pi * np.asarray(r, dtype=float) ** 2


def poisson_L(r):
    return np.asarray(r, dtype=float)


def poisson_F(r, lam: float):
    return 1.0 - np.exp(-lam * math.pi * np.asarray(r, dtype=float) ** 2)


def write_curve_csv(path, curve: SummaryCurve) -> None:
    lines = [f"# kind {curve.kind}"]
    lines += [f"# {key} {value}" for key, value in sorted(curve.meta.items())]
    lines.append("r,value")
    lines += [f"{r:.17g},{v:.17g}" for r, v in zip(curve.r_values, curve.values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_curve_csv(path) -> SummaryCurve:
    kind, meta, rows = None, {}, []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(" ")
            if key == "kind":
                kind = value
            else:
                meta[key] = value
            continue
        if line.strip() == "r,value":
            continue
        r, v = line.split(",")
        rows.append((float(r), float(v)))
    if kind is None:
        raise ValueError(f"{path}: missing '# kind' line")
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    return SummaryCurve(arr[:, 0], arr[:, 1], kind, meta)
