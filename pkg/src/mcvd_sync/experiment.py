"""Experiment orchestration: flat config, end-to-end runs, parameter sweeps,
channel-curve export, and deterministic CSV/JSON results.

Config files are flat YAML mappings using the conventional channel field names
(D_A, D_B, r, d, T_s, sigma2_symbol, delta_t) plus transmitter, noise,
detector and sweep fields.  Unknown keys are errors: silent typos destroy
reproducibility.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np
import yaml
from numpy.random import SeedSequence

from . import __version__
from .channel import ChannelGeometry, MoleculeKind, MoleculeSpec, hitting_rate
from .errors import ConfigError
from .metrics import MetricsReport, eye_diagram, normalized_sync_error, symbol_error_rate
from .rx import (
    DetectorConfig,
    NoiseConfig,
    add_counting_noise,
    decision_threshold,
    detect_symbols_fixed,
    detect_symbols_synced,
    estimate_sync_peaks,
    expected_smoothed_peak,
    inject_sync_error,
    peak_response_offset,
    synthesize_arrivals,
    synthesize_arrivals_particle,
)
from .tx import TxConfig, build_emission_schedule, draw_symbol_durations, generate_symbols

SWEEPABLE = ("snr_db", "sigma2_symbol", "e_bar_target")
BACKENDS = ("analytic_sample", "particle")
THRESHOLD_MODES = ("literal", "calibrated", "midpoint")

#: Reference link defaults: info/sync diffusion (um^2/s), receiver radius and
#: transmitter distance (um), nominal symbol duration and receiver sampling
#: time (s).
DEFAULTS: dict = {
    "D_A": 79.4,
    "D_B": 158.8,
    "r": 2.0,
    "d": 4.0,
    "T_s": 0.38,
    "sigma2_symbol": 0.0,
    "delta_t": 1e-5,
    "K": 10_000,
    "N_info": 1000,
    "N_sync": 1000,
    "p_one": 0.5,
    "snr_db": None,
    "smooth_window": None,
    "gate_fraction": 0.45,
    "refractory_fraction": 0.40,
    "search_horizon": 1.6,
    "threshold_mode": "literal",
    "e_bar_target": 0.0,
    "backend": "analytic_sample",
    "runs": 20,
    "seed": 0,
    "sweep_param": None,
    "sweep_values": None,
}

FULL_SCALE_RUNS = 100
FULL_SCALE_K = 100_000


@dataclass(frozen=True)
class ExperimentConfig:
    D_A: float = DEFAULTS["D_A"]
    D_B: float = DEFAULTS["D_B"]
    r: float = DEFAULTS["r"]
    d: float = DEFAULTS["d"]
    T_s: float = DEFAULTS["T_s"]
    sigma2_symbol: float = DEFAULTS["sigma2_symbol"]
    delta_t: float = DEFAULTS["delta_t"]
    K: int = DEFAULTS["K"]
    N_info: int = DEFAULTS["N_info"]
    N_sync: int = DEFAULTS["N_sync"]
    p_one: float = DEFAULTS["p_one"]
    snr_db: float | None = DEFAULTS["snr_db"]
    smooth_window: int | None = DEFAULTS["smooth_window"]
    gate_fraction: float = DEFAULTS["gate_fraction"]
    refractory_fraction: float = DEFAULTS["refractory_fraction"]
    search_horizon: float = DEFAULTS["search_horizon"]
    threshold_mode: str = DEFAULTS["threshold_mode"]
    e_bar_target: float = DEFAULTS["e_bar_target"]
    backend: str = DEFAULTS["backend"]
    runs: int = DEFAULTS["runs"]
    seed: int = DEFAULTS["seed"]
    sweep_param: str | None = DEFAULTS["sweep_param"]
    sweep_values: tuple | None = DEFAULTS["sweep_values"]

    def __post_init__(self) -> None:
        if self.D_B <= self.D_A:
            raise ConfigError("D_B (sync) must exceed D_A (info): faster sync molecules")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ConfigError(
                f"threshold_mode must be one of {THRESHOLD_MODES}, got {self.threshold_mode!r}"
            )
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.e_bar_target < 0:
            raise ConfigError("e_bar_target must be >= 0")
        if self.delta_t <= 0:
            raise ConfigError("delta_t must be positive")
        if self.snr_db is not None and not math.isfinite(self.snr_db):
            raise ConfigError("snr_db must be finite (omit it for noise-free)")
        if self.sweep_param is not None and self.sweep_param not in SWEEPABLE:
            raise ConfigError(f"sweep_param must be one of {SWEEPABLE}, got {self.sweep_param!r}")
        if self.sweep_values is not None:
            vals = tuple(float(v) for v in self.sweep_values)
            if not vals or not all(math.isfinite(v) for v in vals):
                raise ConfigError("sweep_values must be a non-empty list of finite numbers")
            object.__setattr__(self, "sweep_values", vals)
        # remaining ranges are validated by the component configs they feed

    # -- derived component views ------------------------------------------

    def geometry(self) -> ChannelGeometry:
        return ChannelGeometry(r=self.r, d=self.d)

    def info_spec(self) -> MoleculeSpec:
        return MoleculeSpec(MoleculeKind.INFO, self.D_A)

    def sync_spec(self) -> MoleculeSpec:
        return MoleculeSpec(MoleculeKind.SYNC, self.D_B)

    def effective_smooth_window(self) -> int:
        """Configured bin count, or a width matched to the sync arrival bump.

        The default spans the sync peak time d^2/(6 D_B): at 1000
        molecules per release the peak arrival rate is only a few molecules
        per millisecond, so a narrow (1 ms) average is shot-noise dominated
        and the chained peak search loses lock under duration jitter.
        """
        if self.smooth_window is not None:
            return int(self.smooth_window)
        t_peak_sync = self.d**2 / (6.0 * self.D_B)
        return max(1, int(round(t_peak_sync / self.delta_t)))

    def detector(self, threshold: float) -> DetectorConfig:
        return DetectorConfig(
            smooth_window=self.effective_smooth_window(),
            gate_fraction=self.gate_fraction,
            refractory_fraction=self.refractory_fraction,
            search_horizon=self.search_horizon,
            threshold=threshold,
        )

    def threshold(self) -> float:
        return decision_threshold(
            self.threshold_mode,
            self.geometry(),
            self.info_spec(),
            self.N_info,
            self.T_s,
            self.delta_t,
            snr_db=self.snr_db,
            p_one=self.p_one,
        )

    def fingerprint(self) -> str:
        payload = asdict(self)
        digest = hashlib.sha256(
            json.dumps(payload, sort_keys=True, default=str).encode()
        ).hexdigest()
        return digest[:16]


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    """Build a config from a flat mapping; unknown keys raise ConfigError."""
    unknown = sorted(set(mapping) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    merged = {**DEFAULTS, **mapping}
    if merged["sweep_values"] is not None:
        merged["sweep_values"] = tuple(merged["sweep_values"])
    try:
        return ExperimentConfig(**merged)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    """Read a flat YAML config file."""
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a flat mapping")
    return config_from_mapping(data)


def apply_full_scale(cfg: ExperimentConfig) -> ExperimentConfig:
    """Full-scale averaging: 100 runs of 1e5 symbols each."""
    return replace(cfg, runs=FULL_SCALE_RUNS, K=FULL_SCALE_K)


# -- end-to-end pipeline ----------------------------------------------------


def _run_seeds(cfg: ExperimentConfig, run_index: int) -> tuple[int, int, int, int, int]:
    state = SeedSequence(entropy=(cfg.seed, run_index)).generate_state(5, np.uint64)
    return tuple(int(s) for s in state)  # type: ignore[return-value]


def _synthesize(cfg: ExperimentConfig, schedule, horizon: float, seed: int):
    geom = cfg.geometry()
    specs = (cfg.info_spec(), cfg.sync_spec())
    if cfg.backend == "particle":
        return synthesize_arrivals_particle(
            schedule, geom, specs, cfg.delta_t, horizon, seed=seed, dt=cfg.delta_t
        )
    return synthesize_arrivals(schedule, geom, specs, cfg.delta_t, horizon, seed=seed)


def run_single(cfg: ExperimentConfig, run_index: int = 0) -> tuple[MetricsReport, MetricsReport]:
    """One end-to-end replica; returns (proposed, baseline) metric reports.

    Deterministic given (cfg.seed, run_index).  The baseline report's e_bar
    measures the nominal clock's misalignment against the true symbol starts,
    the quantity its fixed windows silently accumulate under duration jitter.
    """
    tx_seed, synth_seed, noise_info_seed, noise_sync_seed, inject_seed = _run_seeds(
        cfg, run_index
    )
    geom = cfg.geometry()
    txcfg = TxConfig(
        K=cfg.K,
        T_s=cfg.T_s,
        sigma2_symbol=cfg.sigma2_symbol,
        N_info=cfg.N_info,
        N_sync=cfg.N_sync,
        p_one=cfg.p_one,
        seed=tx_seed,
    )
    bits = generate_symbols(txcfg)
    durations = draw_symbol_durations(txcfg)
    schedule = build_emission_schedule(bits, durations, txcfg)
    horizon = max(schedule.end_time, cfg.K * cfg.T_s) + 2.0 * cfg.T_s
    series = _synthesize(cfg, schedule, horizon, synth_seed)
    if cfg.snr_db is not None:
        series = add_counting_noise(
            series, geom, cfg.info_spec(), cfg.N_info, NoiseConfig(cfg.snr_db, noise_info_seed)
        )
        series = add_counting_noise(
            series, geom, cfg.sync_spec(), cfg.N_sync, NoiseConfig(cfg.snr_db, noise_sync_seed)
        )
    threshold = cfg.threshold()
    det = cfg.detector(threshold)
    expected_peak = expected_smoothed_peak(
        geom, cfg.sync_spec(), cfg.N_sync, cfg.delta_t, det.smooth_window
    )
    offset = peak_response_offset(geom, cfg.sync_spec(), cfg.delta_t, det.smooth_window)
    est = estimate_sync_peaks(series, det, cfg.T_s, cfg.K, expected_peak, offset)
    if cfg.e_bar_target > 0:
        est = inject_sync_error(est, cfg.e_bar_target, cfg.T_s, seed=inject_seed)
    rx_synced = detect_symbols_synced(series, est, threshold)
    rx_fixed = detect_symbols_fixed(series, cfg.T_s, cfg.K, threshold)
    e_bar = normalized_sync_error(est, schedule.symbol_starts, geom, cfg.D_B, durations)
    clock_misalign = float(
        np.mean(np.abs(np.arange(cfg.K) * cfg.T_s - schedule.symbol_starts))
        / np.mean(durations)
    )
    proposed = MetricsReport(
        ser=symbol_error_rate(bits, rx_synced),
        e_bar=e_bar,
        erasure_rate=est.erasure_rate,
        n_symbols=cfg.K,
    )
    baseline = MetricsReport(
        ser=symbol_error_rate(bits, rx_fixed),
        e_bar=clock_misalign,
        erasure_rate=0.0,
        n_symbols=cfg.K,
    )
    return proposed, baseline


def run_eye(cfg: ExperimentConfig, run_index: int = 0, span: float | None = None):
    """Eye diagrams of one replica under both alignments.

    Returns (eye_proposed, eye_fixed, span).  Traces are aligned at the
    estimated sync peaks for the proposed scheme and at the nominal clock
    ticks for the baseline; both come from the same arrival series.
    """
    tx_seed, synth_seed, noise_info_seed, noise_sync_seed, _ = _run_seeds(cfg, run_index)
    geom = cfg.geometry()
    txcfg = TxConfig(
        K=cfg.K,
        T_s=cfg.T_s,
        sigma2_symbol=cfg.sigma2_symbol,
        N_info=cfg.N_info,
        N_sync=cfg.N_sync,
        p_one=cfg.p_one,
        seed=tx_seed,
    )
    bits = generate_symbols(txcfg)
    durations = draw_symbol_durations(txcfg)
    schedule = build_emission_schedule(bits, durations, txcfg)
    horizon = max(schedule.end_time, cfg.K * cfg.T_s) + 2.0 * cfg.T_s
    series = _synthesize(cfg, schedule, horizon, synth_seed)
    if cfg.snr_db is not None:
        series = add_counting_noise(
            series, geom, cfg.info_spec(), cfg.N_info, NoiseConfig(cfg.snr_db, noise_info_seed)
        )
        series = add_counting_noise(
            series, geom, cfg.sync_spec(), cfg.N_sync, NoiseConfig(cfg.snr_db, noise_sync_seed)
        )
    det = cfg.detector(cfg.threshold())
    expected_peak = expected_smoothed_peak(
        geom, cfg.sync_spec(), cfg.N_sync, cfg.delta_t, det.smooth_window
    )
    offset = peak_response_offset(geom, cfg.sync_spec(), cfg.delta_t, det.smooth_window)
    est = estimate_sync_peaks(series, det, cfg.T_s, cfg.K, expected_peak, offset)
    if span is None:
        span = float(durations.min())
    eye_proposed = eye_diagram(
        series, est.t_info_start_hat, bits, span, sample_fraction=1.0, n_info=cfg.N_info
    )
    eye_fixed = eye_diagram(
        series, np.arange(cfg.K) * cfg.T_s, bits, span, sample_fraction=1.0, n_info=cfg.N_info
    )
    return eye_proposed, eye_fixed, span


# -- sweeps -------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    sweep_param: str
    sweep_value: float
    ser_proposed: float
    ser_baseline: float
    e_bar: float
    erasure_rate: float
    runs: int
    total_symbols: int
    threshold_mode: str
    threshold: float
    config_fingerprint: str


def _run_task(args: tuple[ExperimentConfig, int]) -> tuple[MetricsReport, MetricsReport]:
    cfg, run_index = args
    return run_single(cfg, run_index)


def run_sweep(
    cfg: ExperimentConfig, out_path=None, workers: int = 1
) -> list[ResultRow]:
    """Average run_single over cfg.runs replicas per sweep value.

    Replicas use seeds derived from (cfg.seed, run_index), so scheduling
    order never changes results.  When out_path is given the rows are also
    written there as CSV, atomically.
    """
    if cfg.sweep_param is None or cfg.sweep_values is None:
        raise ConfigError("sweep requires sweep_param and sweep_values")
    rows: list[ResultRow] = []
    for value in cfg.sweep_values:
        point = replace(
            cfg, sweep_param=None, sweep_values=None, **{cfg.sweep_param: float(value)}
        )
        tasks = [(point, i) for i in range(point.runs)]
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_task, tasks))
        else:
            results = [_run_task(t) for t in tasks]
        rows.append(
            ResultRow(
                sweep_param=cfg.sweep_param,
                sweep_value=float(value),
                ser_proposed=float(np.mean([p.ser for p, _ in results])),
                ser_baseline=float(np.mean([b.ser for _, b in results])),
                e_bar=float(np.mean([p.e_bar for p, _ in results])),
                erasure_rate=float(np.mean([p.erasure_rate for p, _ in results])),
                runs=point.runs,
                total_symbols=point.runs * point.K,
                threshold_mode=point.threshold_mode,
                threshold=point.threshold(),
                config_fingerprint=point.fingerprint(),
            )
        )
    if out_path is not None:
        write_sweep_csv(rows, out_path)
    return rows


SWEEP_CSV_HEADER = (
    "sweep_param,sweep_value,ser_proposed,ser_baseline,e_bar,erasure_rate,"
    "runs,total_symbols,threshold_mode,threshold,config_fingerprint"
)


def sweep_rows_to_csv(rows: list[ResultRow]) -> str:
    lines = [SWEEP_CSV_HEADER]
    for row in rows:
        lines.append(
            f"{row.sweep_param},{row.sweep_value:.10g},{row.ser_proposed:.10g},"
            f"{row.ser_baseline:.10g},{row.e_bar:.10g},{row.erasure_rate:.10g},"
            f"{row.runs},{row.total_symbols},{row.threshold_mode},"
            f"{row.threshold:.10g},{row.config_fingerprint}"
        )
    return "\n".join(lines) + "\n"


def write_sweep_csv(rows: list[ResultRow], path) -> None:
    atomic_write_text(path, sweep_rows_to_csv(rows))


# -- channel curves -----------------------------------------------------------


def channel_curves_csv(
    geom: ChannelGeometry, D_values: list[float], t_max: float, dt: float
) -> str:
    """Hitting-rate curves on a uniform grid, one column per D value."""
    if t_max <= 0 or dt <= 0 or t_max < dt:
        raise ConfigError("need t_max >= dt > 0")
    t = np.arange(0.0, t_max + dt / 2.0, dt)
    cols = [hitting_rate(geom, D, t) for D in D_values]
    header = "t_s," + ",".join(f"f_D{D:g}_per_s" for D in D_values)
    lines = [header]
    for i in range(t.size):
        vals = ",".join(f"{c[i]:.10g}" for c in cols)
        lines.append(f"{t[i]:.10g},{vals}")
    return "\n".join(lines) + "\n"


def emit_channel_curves(
    geom: ChannelGeometry, D_values: list[float], t_max: float, dt: float, path
) -> None:
    atomic_write_text(path, channel_curves_csv(geom, D_values, t_max, dt))


# -- output helpers -----------------------------------------------------------


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory plus rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def invocation_summary(
    command: str, cfg: ExperimentConfig | None, outputs: list[str], wall_time_s: float
) -> dict:
    """Per-invocation JSON payload: fingerprint, versions, wall time."""
    summary = {
        "command": command,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "wall_time_s": round(wall_time_s, 3),
        "outputs": list(outputs),
        "created_unix": int(time.time()),
    }
    if cfg is not None:
        summary["config_fingerprint"] = cfg.fingerprint()
        summary["threshold_mode"] = cfg.threshold_mode
        summary["threshold"] = cfg.threshold()
    return summary
