"""Monte Carlo envelope tests built on spectrogram zeros, and power experiments.

A pipeline maps a signal to the zeros of its Gaussian spectrogram, then to a
summary curve (``L`` or ``F``) on a fixed r grid. The test compares the
deviation of the observed curve from a reference curve with the deviations
of ``m`` pure-noise replicates and rejects when the observed one reaches the
``k``-th largest.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.stats

from .gaf import SPECTROGRAM_GAMMA, l_function_planar
from .patterns import PointPattern, Window
from .rng import SeededStream
from .signals import (
    ChirpParams,
    DiscreteSignal,
    TimeGrid,
    gen_chirp,
    mix,
    sample_discrete_white_noise,
    sample_truncated_white_noise,
)
from .spatial import SummaryCurve, estimate_F, estimate_K_L
from .stft import TFGrid, spectrogram_of
from .zeros import ZeroExtractionConfig, extract_zeros_mgn

STATISTICS = ("S_inf", "S_2")
SUMMARIES = ("L", "F")
REFERENCES = ("mean", "theory")
NOISE_MODELS = ("discrete", "hermite")
BANDS = ("positive", "full")


@dataclass(frozen=True)
class PipelineConfig:
    """Signal -> spectrogram -> zeros -> summary curve settings.

    ``band="positive"`` keeps frequencies in ``[0, pi/dt - margin]``, which
    is the informative half for real templates; ``"full"`` keeps both signs.
    ``query_spacing`` sets the F query lattice (``None``: shorter side / 100).
    """

    tf_step: float = 0.25
    margin: float = 3.0
    band: str = "positive"
    threshold_mode: str = "none"
    epsilon: float = 1e-4
    query_spacing: float | None = 0.5
    noise: str = "discrete"
    hermite_terms: int | None = None
    normalization: str = "unit"

    def __post_init__(self):
        if not self.tf_step > 0:
            raise ValueError("tf_step must be positive")
        if not self.margin >= 0:
            raise ValueError("margin must be nonnegative")
        if self.band not in BANDS:
            raise ValueError(f"band must be one of {BANDS}")
        if self.noise not in NOISE_MODELS:
            raise ValueError(f"noise must be one of {NOISE_MODELS}")
        ZeroExtractionConfig(self.threshold_mode, self.epsilon, self.margin)

    def tf_grid(self, time_grid: TimeGrid) -> TFGrid:
        full = TFGrid.with_step(time_grid, self.tf_step, fast=True)
        if self.band == "full":
            return full
        # positive half only; one bin below zero so minima next to omega = 0 are seen
        size = full.fft_size
        return TFGrid(time_grid, full.domega, size // 2 + 1, -full.domega, full.hop)

    def window(self, time_grid: TimeGrid) -> Window:
        nyquist = math.pi / time_grid.dt
        lo = 0.0 if self.band == "positive" else -nyquist + self.margin
        w = Window(
            lo, nyquist - self.margin,
            time_grid.t_start + self.margin, time_grid.t_end - self.margin,
        )
        return w

    def zero_config(self) -> ZeroExtractionConfig:
        return ZeroExtractionConfig(self.threshold_mode, self.epsilon, 0.0)

    def hermite_order(self, time_grid: TimeGrid) -> int:
        if self.hermite_terms is not None:
            return self.hermite_terms
        half = max(abs(time_grid.t_start), abs(time_grid.t_end))
        return int(math.ceil(0.5 * (half**2 + (math.pi / time_grid.dt) ** 2)))


@dataclass(frozen=True)
class TestConfig:
    """Envelope-test settings; ``k`` defaults to ``alpha * (m + 1)``."""

    __test__ = False

    alpha: float = 0.05
    m: int = 199
    k: int | None = None
    statistic: str = "S_2"
    summary: str = "F"
    r_min: float = 0.0
    r_max: float = 3.0
    n_r: int = 61
    reference: str = "mean"
    seed: SeededStream = field(default_factory=lambda: SeededStream(0))

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        k = self.alpha * (self.m + 1)
        if abs(k - round(k)) > 1e-9:
            raise ValueError(
                f"alpha = {self.alpha} is not k/(m+1) for an integer k with m = {self.m}"
            )
        k = int(round(k))
        if self.k is not None and self.k != k:
            raise ValueError(f"k = {self.k} but alpha * (m + 1) = {k}")
        if not 1 <= k <= self.m:
            raise ValueError(f"rank k = {k} must lie in [1, m]")
        object.__setattr__(self, "k", k)
        if self.statistic not in STATISTICS:
            raise ValueError(f"statistic must be one of {STATISTICS}")
        if self.summary not in SUMMARIES:
            raise ValueError(f"summary must be one of {SUMMARIES}")
        if self.reference not in REFERENCES:
            raise ValueError(f"reference must be one of {REFERENCES}")
        if self.reference == "theory" and self.summary != "L":
            raise ValueError("a closed-form reference exists only for the L summary")
        if not 0 <= self.r_min < self.r_max:
            raise ValueError("need 0 <= r_min < r_max")
        if self.n_r < 2:
            raise ValueError("need at least two r values")
        if isinstance(self.seed, int):
            object.__setattr__(self, "seed", SeededStream(self.seed))

    @property
    def r_values(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.n_r)


@dataclass(frozen=True)
class TestReport:
    __test__ = False

    observed_statistic: float
    sorted_noise_statistics: tuple
    threshold: float
    reject: bool
    k: int
    m: int
    alpha: float
    statistic: str
    summary: str
    r_min: float
    r_max: float
    seed: int
    stream: tuple

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sorted_noise_statistics"] = list(self.sorted_noise_statistics)
        d["stream"] = list(self.stream)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# ----------------------------------------------------------------- pipeline


def zero_pattern(y: DiscreteSignal, pipeline: PipelineConfig) -> PointPattern:
    grid = pipeline.tf_grid(y.grid)
    spec = spectrogram_of(y, grid, pipeline.normalization)
    return extract_zeros_mgn(spec, pipeline.zero_config(), window=pipeline.window(y.grid))


def summary_curve(
    pattern: PointPattern, summary: str, r_values, pipeline: PipelineConfig
) -> SummaryCurve:
    if summary == "L":
        return estimate_K_L(pattern, r_values)[1]
    if summary == "F":
        return estimate_F(pattern, r_values, pipeline.query_spacing)
    raise ValueError(f"unknown summary {summary!r}")


def noise_signal(grid: TimeGrid, stream: SeededStream, pipeline: PipelineConfig) -> DiscreteSignal:
    if pipeline.noise == "hermite":
        return sample_truncated_white_noise(pipeline.hermite_order(grid), grid, stream)
    return DiscreteSignal(grid, sample_discrete_white_noise(grid.n, stream))


def _curves(y: DiscreteSignal, summaries, r_values, pipeline) -> dict:
    pattern = zero_pattern(y, pipeline)
    return {s: summary_curve(pattern, s, r_values, pipeline).values for s in summaries}


def _noise_job(args):
    grid, streams, summaries, r_values, pipeline = args
    return [
        _curves(noise_signal(grid, s, pipeline), summaries, r_values, pipeline)
        for s in streams
    ]


def _run_jobs(jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [_noise_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_noise_job, jobs))


def noise_curves(
    grid: TimeGrid,
    streams,
    summaries,
    r_values,
    pipeline: PipelineConfig,
    workers: int = 1,
) -> list[dict]:
    """Summary curves of pure-noise replicates, one per stream, in stream order."""
    streams = list(streams)
    workers = max(1, int(workers))
    n_chunks = workers * 4 if workers > 1 else 1
    chunks = [c for c in np.array_split(np.arange(len(streams)), n_chunks) if len(c)]
    jobs = [
        (grid, [streams[i] for i in c], tuple(summaries), r_values, pipeline) for c in chunks
    ]
    return [curve for part in _run_jobs(jobs, workers) for curve in part]


# --------------------------------------------------------------- statistics


def summary_statistic(
    est: SummaryCurve,
    ref: SummaryCurve,
    kind: str,
    r_min: float | None = None,
    r_max: float | None = None,
) -> float:
    """``S_inf = max |est - ref|`` or ``S_2 = sqrt(int |est - ref| dr)`` over
    ``[r_min, r_max]`` (the whole grid by default)."""
    if not est.same_grid(ref):
        raise ValueError("estimate and reference live on different r grids")
    return float(_statistics(est.values[None, :], ref.values, est.r_values, kind, r_min, r_max)[0])


def _statistics(curves, ref, r, kind, r_min=None, r_max=None) -> np.ndarray:
    lo = r[0] if r_min is None else r_min
    hi = r[-1] if r_max is None else r_max
    sel = (r >= lo - 1e-12) & (r <= hi + 1e-12)
    if sel.sum() < 2 and kind == "S_2":
        raise ValueError("S_2 needs at least two r values in range")
    dev = np.abs(np.asarray(curves)[:, sel] - np.asarray(ref)[sel])
    if kind == "S_inf":
        return dev.max(axis=1)
    if kind == "S_2":
        return np.sqrt(np.trapezoid(dev, r[sel], axis=1))
    raise ValueError(f"unknown statistic {kind!r}")


def reference_curve(noise_curves_: list[SummaryCurve], observed: SummaryCurve) -> SummaryCurve:
    """Pointwise mean of the noise curves and the observed curve."""
    if len(noise_curves_) < 1:
        raise ValueError("need at least one noise curve")
    for c in noise_curves_:
        if not c.same_grid(observed) or c.kind != observed.kind:
            raise ValueError("curves live on different r grids or summaries")
    stack = np.vstack([c.values for c in noise_curves_] + [observed.values])
    return SummaryCurve(
        observed.r_values, stack.mean(axis=0), observed.kind, {"reference": "mean"}
    )


def theory_reference(r_values) -> np.ndarray:
    """``L`` of the zeros of the Gaussian spectrogram of white noise."""
    return np.asarray(l_function_planar(np.asarray(r_values, dtype=float), SPECTROGRAM_GAMMA))


def _rank_test(curves: np.ndarray, ref: np.ndarray, r, kind, r_min, r_max, k):
    """Row 0 of ``curves`` is the observation, the rest are noise replicates."""
    stats = _statistics(curves, ref, r, kind, r_min, r_max)
    noise = np.sort(stats[1:])[::-1]
    threshold = noise[k - 1]
    return float(stats[0]), noise, float(threshold), bool(stats[0] >= threshold)


def envelope_test(
    y: DiscreteSignal,
    cfg: TestConfig,
    pipeline: PipelineConfig | None = None,
    workers: int = 1,
) -> TestReport:
    """Rank envelope test of "y is pure white noise".

    Noise replicate ``j`` (1-based) is drawn from ``cfg.seed.child(j)`` on
    the observation's own time grid.
    """
    pipeline = pipeline or PipelineConfig()
    r = cfg.r_values
    streams = [cfg.seed.child(j) for j in range(1, cfg.m + 1)]
    noise = noise_curves(y.grid, streams, (cfg.summary,), r, pipeline, workers)
    observed = _curves(y, (cfg.summary,), r, pipeline)[cfg.summary]
    curves = np.vstack([observed] + [c[cfg.summary] for c in noise])
    if cfg.reference == "theory":
        ref = theory_reference(r)
    else:
        ref = curves.mean(axis=0)
    obs, sorted_noise, threshold, reject = _rank_test(
        curves, ref, r, cfg.statistic, cfg.r_min, cfg.r_max, cfg.k
    )
    return TestReport(
        observed_statistic=obs,
        sorted_noise_statistics=tuple(float(v) for v in sorted_noise),
        threshold=threshold,
        reject=reject,
        k=cfg.k,
        m=cfg.m,
        alpha=cfg.alpha,
        statistic=cfg.statistic,
        summary=cfg.summary,
        r_min=cfg.r_min,
        r_max=cfg.r_max,
        seed=int(cfg.seed.seed),
        stream=cfg.seed.key,
    )


# ------------------------------------------------------------------- power


def clopper_pearson(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials and trials >= 1")
    a = 1.0 - level
    lo = 0.0 if successes == 0 else scipy.stats.beta.ppf(a / 2, successes, trials - successes + 1)
    hi = 1.0 if successes == trials else scipy.stats.beta.ppf(1 - a / 2, successes + 1, trials - successes)
    return float(lo), float(hi)


@dataclass(frozen=True)
class PowerConfig:
    """Grid of a power experiment.

    The observation lives on ``n`` samples spanning ``[-T, T)``; a chirp of
    support fraction ``f`` sweeps ``omega1 -> omega2`` over ``[-f T, f T]``.
    """

    snr_list: tuple = (1.0, 5.0, 10.0)
    support_fractions: tuple = (1.0, 0.5)
    r_max_list: tuple = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    summaries: tuple = ("L", "F")
    statistics: tuple = ("S_2",)
    n_repeats: int = 200
    n: int = 1024
    T: float = 32.0
    omega1: float = 5.0
    omega2: float = 45.0
    alpha: float = 0.05
    m: int = 199
    r_min: float = 0.0
    r_step: float = 0.05
    ci_level: float = 0.95
    seed: int = 0

    def __post_init__(self):
        for name in ("snr_list", "support_fractions", "r_max_list", "summaries", "statistics"):
            value = tuple(getattr(self, name))
            if not value:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, value)
        if any(s < 0 for s in self.snr_list):
            raise ValueError("snr values must be nonnegative")
        if any(not 0 < f <= 1 for f in self.support_fractions):
            raise ValueError("support fractions must lie in (0, 1]")
        if any(r <= self.r_min for r in self.r_max_list):
            raise ValueError("every r_max must exceed r_min")
        for s in self.summaries:
            if s not in SUMMARIES:
                raise ValueError(f"unknown summary {s!r}")
        for s in self.statistics:
            if s not in STATISTICS:
                raise ValueError(f"unknown statistic {s!r}")
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be positive")
        if not 0 < self.ci_level < 1:
            raise ValueError("ci_level must lie in (0, 1)")
        TestConfig(alpha=self.alpha, m=self.m, r_min=self.r_min, r_max=max(self.r_max_list))
        nyquist = math.pi / (2 * self.T / self.n)
        if max(self.omega1, self.omega2) >= nyquist:
            raise ValueError(f"chirp frequencies must stay below pi/dt = {nyquist:.4g}")

    @property
    def k(self) -> int:
        return TestConfig(alpha=self.alpha, m=self.m).k

    @property
    def time_grid(self) -> TimeGrid:
        return TimeGrid.symmetric(self.n, self.T)

    @property
    def r_values(self) -> np.ndarray:
        hi = max(self.r_max_list)
        n_r = int(round((hi - self.r_min) / self.r_step)) + 1
        grid = np.linspace(self.r_min, hi, max(n_r, 2))
        return np.unique(np.concatenate([grid, np.asarray(self.r_max_list, dtype=float)]))

    def chirp(self, support: float) -> DiscreteSignal:
        p = ChirpParams(self.omega1, self.omega2, support * self.T)
        return gen_chirp(p, self.time_grid).normalized()

    def panel_name(self, snr: float, support: float) -> str:
        return f"snr{snr:g}_support{support:g}"


def _panel_rows(cfg: PowerConfig, snr, support, rejections) -> list[dict]:
    level = 1.0 - (1.0 - cfg.ci_level) / len(cfg.r_max_list)  # Bonferroni over r_max
    rows = []
    for (summary, stat, r_max), count in sorted(rejections.items()):
        lo, hi = clopper_pearson(count, cfg.n_repeats, level)
        rows.append(
            {
                "snr": snr,
                "support": support,
                "summary": summary,
                "statistic": stat,
                "r_max": r_max,
                "n_repeats": cfg.n_repeats,
                "rejections": count,
                "power": count / cfg.n_repeats,
                "ci_low": lo,
                "ci_high": hi,
                "ci_level": level,
            }
        )
    return rows


def power_experiment(
    cfg: PowerConfig,
    pipeline: PipelineConfig | None = None,
    out_dir=None,
    workers: int = 1,
    progress=None,
) -> list[dict]:
    """Empirical power for every (snr, support, summary, statistic, r_max).

    Replicate ``i`` uses the same observation noise and the same ``m`` noise
    replicates in every panel, so panels differ only through the signal.
    With ``out_dir``, each finished panel is written to
    ``cells/<panel>.json`` and reused on the next run.
    """
    pipeline = pipeline or PipelineConfig()
    root = SeededStream(cfg.seed)
    grid = cfg.time_grid
    r = cfg.r_values
    cache: dict[int, np.ndarray] = {}
    cell_dir = Path(out_dir) / "cells" if out_dir is not None else None
    if cell_dir is not None:
        cell_dir.mkdir(parents=True, exist_ok=True)
    config_echo = json.dumps(asdict(cfg), sort_keys=True)
    rows: list[dict] = []
    for support in cfg.support_fractions:
        template = cfg.chirp(support)
        for snr in cfg.snr_list:
            name = cfg.panel_name(snr, support)
            cell_path = cell_dir / f"{name}.json" if cell_dir is not None else None
            if cell_path is not None and cell_path.exists():
                stored = json.loads(cell_path.read_text())
                if stored.get("config") == config_echo:
                    rows.extend(stored["rows"])
                    continue
            rejections = {
                (s, st, float(rm)): 0
                for s in cfg.summaries for st in cfg.statistics for rm in cfg.r_max_list
            }
            for i in range(cfg.n_repeats):
                if i not in cache:
                    streams = [root.child(1, i, j) for j in range(1, cfg.m + 1)]
                    cache[i] = noise_curves(grid, streams, cfg.summaries, r, pipeline, workers)
                xi = sample_discrete_white_noise(grid.n, root.child(0, i))
                y = mix(template, xi, snr)
                obs = _curves(y, cfg.summaries, r, pipeline)
                for s in cfg.summaries:
                    curves = np.vstack([obs[s]] + [c[s] for c in cache[i]])
                    ref = curves.mean(axis=0)
                    for st in cfg.statistics:
                        for rm in cfg.r_max_list:
                            reject = _rank_test(curves, ref, r, st, cfg.r_min, rm, cfg.k)[3]
                            rejections[(s, st, float(rm))] += int(reject)
                if progress is not None:
                    progress(name, i)
            panel = _panel_rows(cfg, snr, support, rejections)
            if cell_path is not None:
                tmp = cell_path.with_suffix(".tmp")
                tmp.write_text(json.dumps({"config": config_echo, "rows": panel}, indent=2))
                os.replace(tmp, cell_path)
            rows.extend(panel)
    return rows


POWER_COLUMNS = (
    "snr", "support", "summary", "statistic", "r_max", "n_repeats",
    "rejections", "power", "ci_low", "ci_high", "ci_level",
)


def write_power_csv(path, rows) -> None:
    lines = [",".join(POWER_COLUMNS)]
    for row in rows:
        lines.append(",".join(
            f"{row[c]:.17g}" if isinstance(row[c], float) else str(row[c]) for c in POWER_COLUMNS
        ))
    Path(path).write_text("\n".join(lines) + "\n")


def power_lookup(rows, **match) -> dict:
    hits = [row for row in rows if all(row[k] == v for k, v in match.items())]
    if len(hits) != 1:
        raise KeyError(f"{len(hits)} rows match {match}")
    return hits[0]
