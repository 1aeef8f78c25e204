"""Service surface: the endpoints mirror the library exactly."""

import pytest
from fastapi.testclient import TestClient

from mcvd_sync.channel import ChannelGeometry
from mcvd_sync.experiment import ExperimentConfig, channel_curves_csv, run_single, run_sweep
from mcvd_sync.service import app

FAST = {"K": 300, "delta_t": 2e-4, "runs": 2, "threshold_mode": "midpoint"}


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"


def test_curves_matches_library(client):
    req = {"r": 4.0, "d": 4.0, "diffusion_coefficients": [79.4, 520.0], "t_max": 0.05, "dt": 1e-4}
    resp = client.post("/curves", json=req)
    assert resp.status_code == 200
    body = resp.json()
    expected = channel_curves_csv(ChannelGeometry(4.0, 4.0), [79.4, 520.0], 0.05, 1e-4)
    assert body["csv"] == expected
    assert body["summary"]["command"] == "curves"


def test_run_matches_library(client):
    resp = client.post("/run", json={**FAST, "snr_db": 8.0, "run_index": 1})
    assert resp.status_code == 200
    body = resp.json()
    cfg = ExperimentConfig(**{k: v for k, v in FAST.items()}, snr_db=8.0)
    proposed, baseline = run_single(cfg, 1)
    assert body["proposed"]["ser"] == pytest.approx(proposed.ser)
    assert body["baseline"]["ser"] == pytest.approx(baseline.ser)
    assert body["proposed"]["n_symbols"] == cfg.K
    assert body["summary"]["config_fingerprint"] == cfg.fingerprint()
    assert body["summary"]["threshold_mode"] == "midpoint"


def test_sweep_matches_library(client):
    req = {**FAST, "sweep_param": "sigma2_symbol", "sweep_values": [0.0, 0.1]}
    resp = client.post("/sweep", json=req)
    assert resp.status_code == 200
    body = resp.json()
    cfg = ExperimentConfig(**FAST, sweep_param="sigma2_symbol", sweep_values=(0.0, 0.1))
    rows = run_sweep(cfg)
    assert [r["sweep_value"] for r in body["rows"]] == [0.0, 0.1]
    assert body["rows"][0]["ser_proposed"] == pytest.approx(rows[0].ser_proposed)
    assert body["rows"][1]["ser_baseline"] == pytest.approx(rows[1].ser_baseline)
    assert body["csv"].splitlines()[0].startswith("sweep_param,sweep_value")


def test_eye_endpoint(client):
    resp = client.post("/eye", json={**FAST, "K": 120, "sigma2_symbol": 0.1})
    assert resp.status_code == 200
    body = resp.json()
    assert body["eye_height_proposed"] > body["eye_height_fixed"]
    header = body["csv_proposed"].splitlines()[0]
    assert header == "symbol_index,bit,t_offset_s,normalized_cumulative_count"
    assert body["span"] > 0


def test_unknown_key_rejected(client):
    resp = client.post("/run", json={"K": 10, "definitely_not_a_key": 5})
    assert resp.status_code == 422


def test_invalid_config_rejected(client):
    resp = client.post("/run", json={"D_B": 10.0})
    assert resp.status_code == 422
    resp = client.post("/sweep", json={**FAST, "sweep_param": "seed", "sweep_values": [1.0]})
    assert resp.status_code == 422
    resp = client.post("/sweep", json=dict(FAST))  # sweep fields missing
    assert resp.status_code == 422


def test_missing_sweep_values_rejected(client):
    resp = client.post("/sweep", json={**FAST, "sweep_param": "snr_db"})
    assert resp.status_code == 422


def test_run_deterministic_over_http(client):
    a = client.post("/run", json={**FAST, "snr_db": 4.0}).json()
    b = client.post("/run", json={**FAST, "snr_db": 4.0}).json()
    assert a["proposed"] == b["proposed"]
    assert a["baseline"] == b["baseline"]


def test_request_defaults_track_config_defaults():
    from mcvd_sync.experiment import DEFAULTS
    from mcvd_sync.service.schemas import SimulationRequest

    req = SimulationRequest()
    for key, value in DEFAULTS.items():
        assert getattr(req, key) == value, key
