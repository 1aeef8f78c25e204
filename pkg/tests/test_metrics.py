"""Metrics: SER counting, normalized synchronization error, eye extraction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcvd_sync.channel import peak_time
from mcvd_sync.errors import UndefinedEyeError
from mcvd_sync.metrics import (
    MetricsReport,
    eye_diagram,
    eye_to_csv,
    normalized_sync_error,
    symbol_error_rate,
)
from mcvd_sync.rx import ArrivalSeries, SyncEstimate, inject_sync_error

from conftest import D_SYNC, T_S


def test_ser_trivials():
    a = np.array([1, 0, 1, 0])
    assert symbol_error_rate(a, a) == 0.0
    assert symbol_error_rate(a, 1 - a) == 1.0
    assert symbol_error_rate(a, np.array([1, 1, 1, 0])) == 0.25
    with pytest.raises(ValueError):
        symbol_error_rate(a, np.array([1, 0]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=64), st.data())
def test_ser_symmetry_and_permutation_invariance(bits, data):
    a = np.array(bits)
    b = np.array(data.draw(st.lists(st.integers(0, 1), min_size=len(bits), max_size=len(bits))))
    assert symbol_error_rate(a, b) == symbol_error_rate(b, a)
    perm = np.random.default_rng(0).permutation(len(bits))
    assert symbol_error_rate(a[perm], b[perm]) == pytest.approx(symbol_error_rate(a, b))


def _estimate_from_peaks(peaks):
    return SyncEstimate(peak_times=np.asarray(peaks, dtype=float), erasures=np.zeros(len(peaks), bool))


def test_sync_error_zero_when_exact(geom):
    starts = np.arange(4) * T_S
    tpk = peak_time(geom, D_SYNC)
    est = _estimate_from_peaks(np.append(starts + tpk, starts[-1] + T_S + tpk))
    assert normalized_sync_error(est, starts, geom, D_SYNC, np.full(4, T_S)) == 0.0


def test_sync_error_constant_offset(geom):
    starts = np.arange(4) * T_S
    tpk = peak_time(geom, D_SYNC)
    delta = 0.011
    est = _estimate_from_peaks(np.append(starts + tpk + delta, starts[-1] + T_S + tpk + delta))
    e = normalized_sync_error(est, starts, geom, D_SYNC, np.full(4, T_S))
    assert e == pytest.approx(delta / T_S, rel=1e-9)


def test_sync_error_translation_invariant(geom):
    starts = np.arange(5) * T_S
    tpk = peak_time(geom, D_SYNC)
    rng = np.random.default_rng(3)
    noise = rng.normal(0, 0.01, size=6)
    peaks = np.append(starts, starts[-1] + T_S) + tpk + noise
    est = _estimate_from_peaks(peaks)
    e0 = normalized_sync_error(est, starts, geom, D_SYNC, np.full(5, T_S))
    shift = 1.7
    est_shift = _estimate_from_peaks(peaks + shift)
    e1 = normalized_sync_error(est_shift, starts + shift, geom, D_SYNC, np.full(5, T_S))
    assert e1 == pytest.approx(e0, rel=1e-9)


def test_injected_error_is_measured_back(geom):
    # inject on an exact estimate; the measured e_bar equals the target
    K = 100_000
    starts = np.arange(K) * T_S
    tpk = peak_time(geom, D_SYNC)
    est = _estimate_from_peaks(np.append(starts + tpk, starts[-1] + T_S + tpk))
    out = inject_sync_error(est, 0.1, T_S, seed=21)
    e = normalized_sync_error(out, starts, geom, D_SYNC, np.full(K, T_S))
    assert e == pytest.approx(0.1, rel=0.02)


def _step_series(bw, n_bins, one_starts, zero_starts, rate_one=2.0):
    # '1' symbols accumulate rate_one per bin from their start; '0' none
    counts = np.zeros(n_bins)
    for s in one_starts:
        i = int(round(s / bw))
        counts[i : i + int(round(T_S / bw))] += rate_one
    return ArrivalSeries(bw, counts, np.zeros(n_bins))


def test_eye_trivial_no_isi():
    bw = 1e-2
    starts = np.array([0.0, T_S])
    bits = np.array([1, 0])
    series = _step_series(bw, 200, one_starts=[0.0], zero_starts=[T_S])
    span = T_S
    eye = eye_diagram(series, starts, bits, span, sample_fraction=1.0, n_info=100)
    # '0' trace is zero everywhere: height equals the '1' cumulative at t*
    n_off = int(round(span / bw))
    assert eye.eye_height == pytest.approx(2.0 * n_off / 100)
    assert eye.eye_width == pytest.approx(span, abs=2 * bw)
    assert eye.traces.shape == (2, n_off)


def test_eye_height_is_class_gap():
    bw = 1e-2
    starts = np.arange(4) * T_S
    bits = np.array([1, 0, 1, 0])
    series = _step_series(bw, 400, one_starts=[0.0, 2 * T_S], zero_starts=[T_S, 3 * T_S])
    eye = eye_diagram(series, starts, bits, T_S, 1.0, n_info=100)
    assert eye.eye_height == pytest.approx(2.0 * int(round(T_S / bw)) / 100)


def test_eye_requires_both_classes():
    series = ArrivalSeries(1e-2, np.zeros(100), np.zeros(100))
    with pytest.raises(UndefinedEyeError):
        eye_diagram(series, np.array([0.0]), np.array([1]), 0.1, 1.0, 10)


def test_eye_bounds(geom, info_spec, sync_spec):
    from mcvd_sync.rx import synthesize_arrivals
    from mcvd_sync.tx import TxConfig, build_emission_schedule, draw_symbol_durations, generate_symbols

    cfg = TxConfig(K=40, T_s=T_S, sigma2_symbol=0.05, N_info=1000, N_sync=10, seed=6)
    bits = generate_symbols(cfg)
    durs = draw_symbol_durations(cfg)
    sched = build_emission_schedule(bits, durs, cfg)
    series = synthesize_arrivals(sched, geom, (info_spec, sync_spec), 1e-3, sched.end_time + 1.0, 7)
    span = float(durs.min())
    eye = eye_diagram(series, sched.symbol_starts, bits, span, 1.0, n_info=1000)
    assert eye.eye_height <= 1.0
    assert 0.0 <= eye.eye_width <= span + 1e-9
    assert eye.opening.shape == eye.offsets.shape


def test_eye_csv(tmp_path):
    bw = 1e-2
    series = _step_series(bw, 200, one_starts=[0.0], zero_starts=[T_S])
    eye = eye_diagram(series, np.array([0.0, T_S]), np.array([1, 0]), T_S, 1.0, 100)
    path = tmp_path / "eye.csv"
    eye_to_csv(eye, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "symbol_index,bit,t_offset_s,normalized_cumulative_count"
    assert len(lines) == 1 + eye.traces.size


def test_metrics_report_validation():
    MetricsReport(ser=0.1, e_bar=0.01, erasure_rate=0.0, n_symbols=10)
    with pytest.raises(ValueError):
        MetricsReport(ser=1.1, e_bar=0.0, erasure_rate=0.0, n_symbols=10)
    with pytest.raises(ValueError):
        MetricsReport(ser=0.1, e_bar=0.0, erasure_rate=0.0, n_symbols=0)
    with pytest.raises(ValueError):
        MetricsReport(ser=0.1, e_bar=-0.2, erasure_rate=0.0, n_symbols=5)
