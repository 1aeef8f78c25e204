"""Evaluation metrics: symbol error rate, normalized synchronization error,
and eye-diagram extraction from binned arrivals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelGeometry, peak_time
from .errors import UndefinedEyeError
from .rx import ArrivalSeries, SyncEstimate


@dataclass(frozen=True)
class MetricsReport:
    ser: float
    e_bar: float
    erasure_rate: float
    n_symbols: int
    eye_height: float | None = None
    eye_width: float | None = None

    def __post_init__(self) -> None:
        if self.n_symbols < 1:
            raise ValueError("n_symbols must be >= 1")
        if not (0.0 <= self.ser <= 1.0):
            raise ValueError("ser must lie in [0,1]")
        if not (0.0 <= self.erasure_rate <= 1.0):
            raise ValueError("erasure_rate must lie in [0,1]")
        if self.e_bar < 0.0:
            raise ValueError("e_bar must be >= 0")


def symbol_error_rate(tx_bits: np.ndarray, rx_bits: np.ndarray) -> float:
    """Hamming distance over length.  Raises ValueError on length mismatch."""
    tx_bits = np.asarray(tx_bits)
    rx_bits = np.asarray(rx_bits)
    if tx_bits.shape != rx_bits.shape:
        raise ValueError(f"length mismatch: {tx_bits.shape} vs {rx_bits.shape}")
    return float(np.mean(tx_bits != rx_bits))


def normalized_sync_error(
    est: SyncEstimate,
    truth_starts: np.ndarray,
    geom: ChannelGeometry,
    D_sync: float,
    durations: np.ndarray,
) -> float:
    """e_bar = mean_k |t_hat(k) - t(k)| / mean_k T(k).

    Ground truth t(k) is the analytic mean peak, truth_starts[k] + d^2/(6 D),
    not the realized noisy argmax.
    """
    truth_starts = np.asarray(truth_starts, dtype=float)
    durations = np.asarray(durations, dtype=float)
    t_hat = est.t_sync_peak_hat
    if truth_starts.size != t_hat.size or durations.size != t_hat.size:
        raise ValueError("estimate, truth_starts and durations must have equal length")
    truth = truth_starts + peak_time(geom, D_sync)
    return float(np.mean(np.abs(t_hat - truth)) / np.mean(durations))


@dataclass(frozen=True)
class EyeDiagram:
    """Per-symbol cumulative info-count traces over a common window.

    traces[k, j] is the info count accumulated over [start_k, start_k +
    (j+1) dt), normalized by n_info; offsets holds the (j+1) dt values.
    """

    offsets: np.ndarray
    traces: np.ndarray
    bits: np.ndarray
    eye_height: float
    eye_width: float

    @property
    def opening(self) -> np.ndarray:
        """min over '1' traces minus max over '0' traces, per offset."""
        ones = self.traces[self.bits == 1]
        zeros = self.traces[self.bits == 0]
        return ones.min(axis=0) - zeros.max(axis=0)


def eye_diagram(
    series: ArrivalSeries,
    starts: np.ndarray,
    bits: np.ndarray,
    span: float,
    sample_fraction: float,
    n_info: int,
) -> EyeDiagram:
    """Overlay normalized cumulative info counts aligned at the given starts.

    eye_height is evaluated at t* = sample_fraction * span as the smallest
    '1' trace minus the largest '0' trace; eye_width is the longest
    contiguous stretch of offsets where that opening stays positive.

    Raises UndefinedEyeError unless both bit values are present.
    """
    starts = np.asarray(starts, dtype=float)
    bits = np.asarray(bits)
    if starts.size != bits.size:
        raise ValueError("starts and bits must have equal length")
    if not ((bits == 1).any() and (bits == 0).any()):
        raise UndefinedEyeError("need at least one '1' and one '0' symbol")
    if not (0.0 < sample_fraction <= 1.0):
        raise ValueError("sample_fraction must lie in (0,1]")
    dt = series.bin_width
    n_off = int(round(span / dt))
    if n_off < 1:
        raise ValueError("span shorter than one bin")
    cum = np.concatenate([[0.0], np.cumsum(series.counts_info)])
    i0 = np.floor(starts / dt).astype(np.int64)
    if i0.min() < 0 or (i0.max() + n_off) >= series.n_bins:
        raise ValueError("a trace window falls outside the series")
    idx = i0[:, None] + np.arange(1, n_off + 1)[None, :]
    traces = (cum[idx] - cum[i0][:, None]) / float(n_info)
    offsets = np.arange(1, n_off + 1) * dt
    ones = traces[bits == 1]
    zeros = traces[bits == 0]
    opening = ones.min(axis=0) - zeros.max(axis=0)
    j_star = min(n_off - 1, max(0, int(round(sample_fraction * n_off)) - 1))
    height = float(opening[j_star])
    open_mask = opening > 0
    width = float(_longest_run(open_mask) * dt)
    return EyeDiagram(
        offsets=offsets, traces=traces, bits=bits, eye_height=height, eye_width=width
    )


def _longest_run(mask: np.ndarray) -> int:
    best = run = 0
    for v in mask:
        run = run + 1 if v else 0
        best = max(best, run)
    return best


def eye_to_csv(eye: EyeDiagram, path) -> None:
    """Columns symbol_index,bit,t_offset_s,normalized_cumulative_count."""
    with open(path, "w", newline="") as fh:
        fh.write("symbol_index,bit,t_offset_s,normalized_cumulative_count\n")
        for k in range(eye.traces.shape[0]):
            b = int(eye.bits[k])
            for j, t in enumerate(eye.offsets):
                fh.write(f"{k},{b},{t:.10g},{eye.traces[k, j]:.10g}\n")
