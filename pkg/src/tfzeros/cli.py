"""``tfzeros`` command line.

Every subcommand reads an optional JSON manifest, applies ``--set`` overrides
and the global flags, writes the fully resolved manifest (seed included) to
the output directory, then produces its artifacts there.

Exit status: 0 on success, 2 on invalid input, 1 on runtime failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import __version__
from .detect import (
    PipelineConfig,
    PowerConfig,
    TestConfig,
    envelope_test,
    power_experiment,
    write_power_csv,
    zero_pattern,
)
from .gaf import (
    first_intensity,
    gaf_zeros,
    hole_probability_asymptote,
    l_function_planar,
    pair_correlation_planar,
    ripley_k_planar,
)
from .patterns import Window, read_pattern_csv, write_pattern_csv
from .rng import SeededStream, seed_from_env
from .signals import (
    ChirpParams,
    DiscreteSignal,
    TimeGrid,
    WaveParams,
    gen_chirp,
    gen_sine,
    gen_wave,
    hermite,
    mix,
    read_signal_csv,
    sample_discrete_white_noise,
    sample_truncated_white_noise,
    write_signal_csv,
)
from .spatial import (
    SummaryCurve,
    default_r_values,
    estimate_F,
    estimate_K_L,
    estimate_pcf,
    write_curve_csv,
)
from .stft import TFGrid, spectrogram_of, write_tf_binary, write_tf_csv
from .zeros import ZeroExtractionConfig, extract_zeros_mgn

SUBCOMMANDS = ("gen", "spec", "zeros", "stats", "gafzeros", "theory", "detect", "power")
FORMATS = ("csv", "json", "bin")
MANIFEST_NAME = "manifest.json"


class UsageError(Exception):
    """Invalid manifest or flags (exit status 2)."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSpec(_Section):
    n: int = Field(4096, ge=8)
    T: float = Field(64.0, gt=0)


class SignalSpec(_Section):
    kind: Literal["sine", "chirp", "wave", "hermite", "noise", "hermite_noise", "file"] = "chirp"
    A: float = 1.0
    omega: float = 10.0
    omega1: float = 20.0
    omega2: float = 80.0
    support: float = Field(1.0, gt=0, le=1)
    taper_start: float = 0.8
    C: float = 1.0
    d: float = 10.0
    phi: float = 0.0
    t0: float = 40.0
    k: int = Field(0, ge=0)
    n_terms: Optional[int] = None
    path: Optional[str] = None


class ZerosSpec(_Section):
    tf_step: float = Field(0.25, gt=0)
    margin: float = Field(3.0, ge=0)
    threshold_mode: Literal["none", "relative"] = "none"
    epsilon: float = 1e-4
    band: Literal["positive", "full"] = "full"


class StatsSpec(_Section):
    summaries: list[Literal["K", "L", "F", "pcf"]] = ["L", "F", "pcf"]
    pattern: Optional[str] = None
    r_max: Optional[float] = None
    n_r: int = Field(64, ge=2)
    query_spacing: Optional[float] = None
    bandwidth: Optional[float] = None
    svg: bool = False


class GafSpec(_Section):
    gamma: float = Field(1.0, gt=0)
    half_side: float = Field(5.0, gt=0)
    n_terms: int = Field(100, ge=1)


class TheorySpec(_Section):
    kind: Literal["pcf", "K", "L", "rho1", "hole"] = "pcf"
    gamma: float = Field(0.5, gt=0)
    r_max: float = Field(6.0, gt=0)
    n_r: int = Field(121, ge=2)


class TestSpec(_Section):
    alpha: float = 0.05
    m: int = 199
    statistic: Literal["S_inf", "S_2"] = "S_2"
    summary: Literal["L", "F"] = "F"
    r_min: float = 0.0
    r_max: float = 3.0
    n_r: int = 61
    reference: Literal["mean", "theory"] = "mean"
    noise: Literal["discrete", "hermite"] = "discrete"
    band: Literal["positive", "full"] = "positive"
    query_spacing: Optional[float] = 0.5


class PowerSpec(_Section):
    snr_list: list[float] = [1.0, 5.0, 10.0]
    support_fractions: list[float] = [1.0, 0.5]
    r_max_list: list[float] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
    summaries: list[Literal["L", "F"]] = ["L", "F"]
    statistics: list[Literal["S_inf", "S_2"]] = ["S_2"]
    n_repeats: int = Field(200, ge=1)
    omega1: float = 20.0
    omega2: float = 80.0


class ExperimentManifest(_Section):
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    output_dir: Optional[str] = None
    format: Literal["csv", "json", "bin"] = "csv"
    snr: Optional[float] = None
    grid: GridSpec = GridSpec()
    signal: SignalSpec = SignalSpec()
    zeros: ZerosSpec = ZerosSpec()
    stats: StatsSpec = StatsSpec()
    gaf: GafSpec = GafSpec()
    theory: TheorySpec = TheorySpec()
    test: TestSpec = TestSpec()
    power: PowerSpec = PowerSpec()

    @field_validator("snr")
    @classmethod
    def _snr(cls, v):
        if v is not None and (math.isnan(v) or v < 0):
            raise ValueError("snr must be nonnegative (or null for a noiseless template)")
        return v


# ---------------------------------------------------------------- manifest


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_manifest(path: str | None, overrides: list[str], args) -> ExperimentManifest:
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read manifest {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("manifest must be a JSON object")
        # an echoed manifest.json can be fed back as is
        data.pop("command", None)
        data.pop("version", None)
    for item in overrides or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise UsageError(f"--set {key}: {part} is not a section")
        node[parts[-1]] = _parse_value(value)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["output_dir"] = args.out
    if args.format is not None:
        data["format"] = args.format
    try:
        manifest = ExperimentManifest.model_validate(data)
    except ValidationError as exc:
        raise UsageError(str(exc)) from exc
    if manifest.seed is None:
        try:
            env_seed = seed_from_env(0)
        except ValueError as exc:
            raise UsageError(f"TFZEROS_SEED is not an integer: {exc}") from exc
        manifest = manifest.model_copy(update={"seed": env_seed})
    if manifest.output_dir is None:
        manifest = manifest.model_copy(update={"output_dir": "."})
    return manifest


def echo_manifest(manifest: ExperimentManifest, out: Path, command: str) -> None:
    doc = {"command": command, "version": __version__, **manifest.model_dump(mode="json")}
    (out / MANIFEST_NAME).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ----------------------------------------------------------------- helpers


@contextmanager
def validating():
    """Report constructor-level ``ValueError`` as invalid input."""
    try:
        yield
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def time_grid(m: ExperimentManifest) -> TimeGrid:
    return TimeGrid.symmetric(m.grid.n, m.grid.T)


def build_signal(m: ExperimentManifest, root: SeededStream) -> DiscreteSignal:
    """Template (or pure noise) from the manifest, mixed with noise when ``snr`` is set.

    Streams: ``child(0)`` is the observation noise.
    """
    with validating():
        return _build_signal(m, root)


def _build_signal(m: ExperimentManifest, root: SeededStream) -> DiscreteSignal:
    spec = m.signal
    if spec.kind == "file":
        if spec.path is None:
            raise UsageError("signal.kind=file needs signal.path")
        template = read_signal_csv(spec.path)
    else:
        grid = time_grid(m)
        if spec.kind == "sine":
            template = gen_sine(spec.A, spec.omega, grid)
        elif spec.kind == "chirp":
            p = ChirpParams(spec.omega1, spec.omega2, spec.support * m.grid.T, spec.taper_start)
            template = gen_chirp(p, grid)
        elif spec.kind == "wave":
            template = gen_wave(WaveParams(spec.C, spec.d, spec.phi, spec.t0), grid)
        elif spec.kind == "hermite":
            template = DiscreteSignal(grid, hermite(spec.k, grid.times))
        elif spec.kind == "noise":
            return DiscreteSignal(grid, sample_discrete_white_noise(grid.n, root.child(0)))
        else:
            n_terms = spec.n_terms
            if n_terms is None:
                n_terms = PipelineConfig().hermite_order(grid)
            return sample_truncated_white_noise(n_terms, grid, root.child(0))
    if m.snr is None:
        return template
    noise = sample_discrete_white_noise(template.grid.n, root.child(0))
    if template.energy == 0.0:
        return DiscreteSignal(template.grid, noise)
    return mix(template, noise, m.snr)


def tf_grid(m: ExperimentManifest, signal: DiscreteSignal) -> TFGrid:
    with validating():
        return TFGrid.with_step(signal.grid, m.zeros.tf_step)


def spectrogram_zeros(m: ExperimentManifest, signal: DiscreteSignal):
    z = m.zeros
    with validating():
        cfg = ZeroExtractionConfig(z.threshold_mode, z.epsilon, z.margin)
        pipeline = PipelineConfig(
            tf_step=z.tf_step, margin=z.margin, band="positive",
            threshold_mode=z.threshold_mode, epsilon=z.epsilon,
        )
        grid = tf_grid(m, signal)
    if z.band == "positive":
        return zero_pattern(signal, pipeline)
    return extract_zeros_mgn(spectrogram_of(signal, grid), cfg)


def svg_chart(curves: list[SummaryCurve], path: Path, width=480, height=320) -> None:
    """Minimal line chart, one polyline per curve."""
    pad = 40
    r_all = np.concatenate([c.r_values for c in curves])
    v_all = np.concatenate([c.values for c in curves])
    r_lo, r_hi = float(r_all.min()), float(r_all.max())
    v_lo, v_hi = float(v_all.min()), float(v_all.max())
    r_hi = r_hi if r_hi > r_lo else r_lo + 1
    v_hi = v_hi if v_hi > v_lo else v_lo + 1
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="{pad}" y="{pad // 2}" width="{width - 1.5 * pad:g}" '
        f'height="{height - 1.5 * pad:g}" fill="none" stroke="#444"/>',
    ]
    for i, c in enumerate(curves):
        x = pad + (c.r_values - r_lo) / (r_hi - r_lo) * (width - 1.5 * pad)
        y = height - pad - (c.values - v_lo) / (v_hi - v_lo) * (height - 1.5 * pad)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
        parts.append(
            f'<polyline fill="none" stroke="{colors[i % len(colors)]}" points="{pts}"/>'
        )
        parts.append(
            f'<text x="{pad + 5}" y="{pad + 14 * (i + 1)}" font-size="12" '
            f'fill="{colors[i % len(colors)]}">{c.kind}</text>'
        )
    parts.append(f'<text x="{width / 2:g}" y="{height - 8}" font-size="12">r</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


# ------------------------------------------------------------- subcommands


def cmd_gen(m, root, out, workers):
    signal = build_signal(m, root)
    if m.format == "json":
        doc = {
            "t": signal.times.tolist(),
            "re": signal.samples.real.tolist(),
            "im": signal.samples.imag.tolist(),
        }
        (out / "signal.json").write_text(json.dumps(doc) + "\n")
    else:
        write_signal_csv(out / "signal.csv", signal)


def cmd_spec(m, root, out, workers):
    signal = build_signal(m, root)
    spec = spectrogram_of(signal, tf_grid(m, signal))
    if m.format == "bin":
        write_tf_binary(out / "spectrogram.bin", spec)
    elif m.format == "json":
        doc = {
            "t": spec.grid.times.tolist(),
            "omega": spec.grid.omegas.tolist(),
            "values": spec.values.tolist(),
        }
        (out / "spectrogram.json").write_text(json.dumps(doc) + "\n")
    else:
        write_tf_csv(out / "spectrogram.csv", spec)


def cmd_zeros(m, root, out, workers):
    write_pattern_csv(out / "zeros.csv", spectrogram_zeros(m, build_signal(m, root)))


def cmd_stats(m, root, out, workers):
    st = m.stats
    if st.pattern is not None:
        pattern = read_pattern_csv(st.pattern)
    else:
        pattern = spectrogram_zeros(m, build_signal(m, root))
        write_pattern_csv(out / "zeros.csv", pattern)
    if st.r_max is None:
        r = default_r_values(pattern.window, st.n_r)
    else:
        r = np.linspace(0.0, st.r_max, st.n_r)
    with validating():
        half = 0.5 * min(pattern.window.width, pattern.window.height)
        if r[-1] >= half:
            raise ValueError(f"stats.r_max must stay below {half:g} for this window")
    curves = []
    for kind in st.summaries:
        if kind in ("K", "L"):
            k_curve, l_curve = estimate_K_L(pattern, r)
            curve = k_curve if kind == "K" else l_curve
        elif kind == "F":
            curve = estimate_F(pattern, r, st.query_spacing)
        else:
            curve = estimate_pcf(pattern, r, st.bandwidth)
        write_curve_csv(out / f"{kind}.csv", curve)
        curves.append(curve)
    if st.svg:
        svg_chart(curves, out / "summaries.svg")


def cmd_gafzeros(m, root, out, workers):
    g = m.gaf
    with validating():
        window = Window.square(g.half_side)
        if g.half_side * math.sqrt(2) > 0.8 * math.sqrt(g.n_terms / g.gamma):
            raise ValueError("gaf.half_side is too large for gaf.n_terms; add terms")
    pattern = gaf_zeros(g.gamma, window, g.n_terms, root.child(0))
    write_pattern_csv(out / "gaf_zeros.csv", pattern)


def cmd_theory(m, root, out, workers):
    th = m.theory
    r = np.linspace(0.0, th.r_max, th.n_r)
    if th.kind == "pcf":
        values = pair_correlation_planar(r, th.gamma)
    elif th.kind == "K":
        values = ripley_k_planar(r, th.gamma)
    elif th.kind == "L":
        values = l_function_planar(r, th.gamma)
    elif th.kind == "rho1":
        values = np.full(len(r), first_intensity(th.gamma))
    else:
        values = hole_probability_asymptote(r)
    lines = [f"# kind {th.kind}", f"# gamma {th.gamma!r}", "r,value"]
    lines += [f"{a:.17g},{b:.17g}" for a, b in zip(r, np.asarray(values, dtype=float))]
    (out / f"theory_{th.kind}.csv").write_text("\n".join(lines) + "\n")


def _config_doc(m: ExperimentManifest) -> dict:
    # where the files go is not part of the experiment
    return m.model_dump(mode="json", exclude={"output_dir"})


def _pipeline(m) -> PipelineConfig:
    with validating():
        return PipelineConfig(
            tf_step=m.zeros.tf_step,
            margin=m.zeros.margin,
            band=m.test.band,
            threshold_mode=m.zeros.threshold_mode,
            epsilon=m.zeros.epsilon,
            query_spacing=m.test.query_spacing,
            noise=m.test.noise,
        )


def cmd_detect(m, root, out, workers):
    t = m.test
    with validating():
        cfg = TestConfig(
            alpha=t.alpha, m=t.m, statistic=t.statistic, summary=t.summary,
            r_min=t.r_min, r_max=t.r_max, n_r=t.n_r, reference=t.reference,
            seed=root.child(1),
        )
    report = envelope_test(build_signal(m, root), cfg, _pipeline(m), workers)
    doc = {"config": _config_doc(m), **report.to_dict()}
    (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n")


def cmd_power(m, root, out, workers):
    p = m.power
    with validating():
        cfg = PowerConfig(
            snr_list=tuple(p.snr_list),
            support_fractions=tuple(p.support_fractions),
            r_max_list=tuple(p.r_max_list),
            summaries=tuple(p.summaries),
            statistics=tuple(p.statistics),
            n_repeats=p.n_repeats,
            n=m.grid.n,
            T=m.grid.T,
            omega1=p.omega1,
            omega2=p.omega2,
            alpha=m.test.alpha,
            m=m.test.m,
            r_min=m.test.r_min,
            seed=int(m.seed),
        )
    rows = power_experiment(cfg, _pipeline(m), out_dir=out, workers=workers)
    write_power_csv(out / "power.csv", rows)
    doc = {"config": _config_doc(m), "rows": rows}
    (out / "power.json").write_text(json.dumps(doc, indent=2) + "\n")


COMMANDS = {
    "gen": cmd_gen,
    "spec": cmd_spec,
    "zeros": cmd_zeros,
    "stats": cmd_stats,
    "gafzeros": cmd_gafzeros,
    "theory": cmd_theory,
    "detect": cmd_detect,
    "power": cmd_power,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="JSON experiment manifest")
    common.add_argument("--seed", type=int, help="root seed (fallback: $TFZEROS_SEED, then 0)")
    common.add_argument("--out", help="output directory (default: manifest output_dir or .)")
    common.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: available processors)")
    common.add_argument("--format", choices=FORMATS, help="output format where applicable")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a manifest field, e.g. --set signal.kind=sine")
    parser = argparse.ArgumentParser(prog="tfzeros", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tfzeros {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    helps = {
        "gen": "generate a template signal or noise (signal.csv)",
        "spec": "Gaussian spectrogram (spectrogram.csv / .bin / .json)",
        "zeros": "spectrogram zeros (zeros.csv)",
        "stats": "summary curves of a zero pattern (K/L/F/pcf .csv)",
        "gafzeros": "zeros of one planar GAF sample (gaf_zeros.csv)",
        "theory": "closed-form curves for GAF zeros (theory_<kind>.csv)",
        "detect": "envelope test on one signal (report.json)",
        "power": "power experiment grid (power.csv, power.json)",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    try:
        if workers < 1:
            raise UsageError("--workers must be positive")
        manifest = load_manifest(args.manifest, args.set, args)
        out = Path(manifest.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        echo_manifest(manifest, out, args.command)
        root = SeededStream(int(manifest.seed))
    except UsageError as exc:
        print(f"tfzeros: invalid input: {exc}", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](manifest, root, out, workers)
    except UsageError as exc:
        print(f"tfzeros: invalid input: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and fail
        print(f"tfzeros: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
