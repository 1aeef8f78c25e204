"""Particle engine: determinism, parallel equivalence, and statistical
agreement with the closed-form channel at unit-test scale (the 1e6-particle
comparison lives in the acceptance suite).
"""

import numpy as np
import pytest

from mcvd_sync.brownian import (
    HitRecord,
    ParticleSimConfig,
    dump_hit_times_csv,
    empirical_fraction,
    simulate_first_hits,
)
from mcvd_sync.channel import ChannelGeometry, hitting_fraction

from conftest import D_INFO

GEOM = ChannelGeometry(r=2.0, d=4.0)


def _cfg(**kw) -> ParticleSimConfig:
    base = dict(geom=GEOM, D=D_INFO, n_molecules=2000, dt=1e-5, t_max=0.1, seed=7)
    base.update(kw)
    return ParticleSimConfig(**base)


def test_config_guard_rejects_coarse_steps():
    with pytest.raises(ValueError):
        ParticleSimConfig(geom=GEOM, D=D_INFO, n_molecules=10, dt=1.0, t_max=2.0, seed=0)
    with pytest.raises(ValueError):
        ParticleSimConfig(geom=GEOM, D=D_INFO, n_molecules=0, dt=1e-5, t_max=0.1, seed=0)
    with pytest.raises(ValueError):
        ParticleSimConfig(geom=GEOM, D=D_INFO, n_molecules=10, dt=1e-5, t_max=1e-6, seed=0)


def test_determinism_same_seed():
    a = simulate_first_hits(_cfg())
    b = simulate_first_hits(_cfg())
    np.testing.assert_array_equal(a.hit_times, b.hit_times)
    assert a.n_released == b.n_released


def test_different_seed_differs():
    a = simulate_first_hits(_cfg())
    b = simulate_first_hits(_cfg(seed=8))
    assert a.hit_times.size != b.hit_times.size or not np.array_equal(a.hit_times, b.hit_times)


def test_parallel_equals_serial():
    cfg = _cfg(n_molecules=150_000, t_max=0.02)
    serial = simulate_first_hits(cfg, workers=1)
    parallel = simulate_first_hits(cfg, workers=2)
    np.testing.assert_array_equal(serial.hit_times, parallel.hit_times)


def test_hit_times_sorted_and_in_range():
    rec = simulate_first_hits(_cfg())
    assert np.all(np.diff(rec.hit_times) >= 0)
    assert rec.hit_times.size <= rec.n_released
    if rec.hit_times.size:
        assert rec.hit_times[0] > 0
        assert rec.hit_times[-1] <= 0.1 + 1e-12


def test_far_transmitter_never_hits():
    # displacement scale sqrt(2 D t_max) ~ 0.13 um against a 1000 um gap
    cfg = ParticleSimConfig(
        geom=ChannelGeometry(r=2.0, d=1000.0), D=D_INFO, n_molecules=5000, dt=1e-5,
        t_max=0.01, seed=3,
    )
    rec = simulate_first_hits(cfg)
    assert rec.hit_times.size == 0


def test_empirical_fraction_counting():
    rec = HitRecord(hit_times=np.array([0.1, 0.2, 0.4]), n_released=6)
    assert empirical_fraction(rec, 0.0) == 0.0
    assert empirical_fraction(rec, 0.1) == pytest.approx(1 / 6)
    assert empirical_fraction(rec, 0.3) == pytest.approx(2 / 6)
    assert empirical_fraction(rec, 5.0) == pytest.approx(3 / 6)


def test_statistical_agreement_smoke():
    # loose 4-sigma envelope plus the documented endpoint-check bias margin
    cfg = _cfg(n_molecules=40_000, t_max=0.2, seed=12)
    rec = simulate_first_hits(cfg)
    for t in (0.05, 0.2):
        F = hitting_fraction(GEOM, D_INFO, t)
        tol = 4 * np.sqrt(F * (1 - F) / cfg.n_molecules) + 0.004
        assert abs(empirical_fraction(rec, t) - F) <= tol


def test_csv_dump(tmp_path):
    rec = simulate_first_hits(_cfg(n_molecules=500))
    path = tmp_path / "hits.csv"
    dump_hit_times_csv(rec, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "hit_time_s"
    assert len(lines) == 1 + rec.hit_times.size
    np.testing.assert_allclose(
        np.array([float(x) for x in lines[1:]]), rec.hit_times, rtol=1e-9
    )


def test_replica_independence_variance():
    # disjoint seeds behave like independent Binomial draws
    n, t_max = 2000, 0.05
    fracs = []  # 100 replicas, disjoint seeds
    for seed in range(100):
        rec = simulate_first_hits(_cfg(n_molecules=n, t_max=t_max, seed=1000 + seed))
        fracs.append(rec.hit_times.size / n)
    fracs = np.asarray(fracs)
    p = fracs.mean()
    expected_var = p * (1 - p) / n
    ratio = fracs.var(ddof=1) / expected_var
    assert 0.5 <= ratio <= 2.0
