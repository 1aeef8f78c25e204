"""FastAPI service exposing the simulator to thin clients.

Endpoints wrap the experiment pipeline; CSV payloads are returned in the
response body so clients decide where files land.
"""

from __future__ import annotations

import io
import time
from dataclasses import asdict

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..channel import ChannelGeometry
from ..errors import ConfigError, SeriesTooShortError, UndefinedEyeError
from ..experiment import (
    apply_full_scale,
    channel_curves_csv,
    config_from_mapping,
    invocation_summary,
    run_eye,
    run_single,
    run_sweep,
    sweep_rows_to_csv,
)
from ..metrics import EyeDiagram
from .schemas import (
    CurvesRequest,
    CurvesResponse,
    EyeRequest,
    EyeResponse,
    HealthResponse,
    MetricsModel,
    RunRequest,
    RunResponse,
    SimulationRequest,
    SweepResponse,
    SweepRowModel,
)

app = FastAPI(
    title="mcvd-sync",
    description="Diffusion-based molecular communication link simulator "
    "with per-symbol synchronization via faster molecules.",
    version=__version__,
)


def _build_config(req: SimulationRequest):
    try:
        cfg = config_from_mapping(req.config_mapping())
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    if req.full_scale:
        cfg = apply_full_scale(cfg)
    return cfg


def _eye_csv(eye: EyeDiagram) -> str:
    buf = io.StringIO()
    buf.write("symbol_index,bit,t_offset_s,normalized_cumulative_count\n")
    for k in range(eye.traces.shape[0]):
        b = int(eye.bits[k])
        for j, t in enumerate(eye.offsets):
            buf.write(f"{k},{b},{t:.10g},{eye.traces[k, j]:.10g}\n")
    return buf.getvalue()


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/run", response_model=RunResponse)
def run(req: RunRequest) -> RunResponse:
    cfg = _build_config(req)
    t0 = time.perf_counter()
    try:
        proposed, baseline = run_single(cfg, req.run_index)
    except (SeriesTooShortError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    summary = invocation_summary("run", cfg, [], time.perf_counter() - t0)
    return RunResponse(
        proposed=MetricsModel(**_metrics_dict(proposed)),
        baseline=MetricsModel(**_metrics_dict(baseline)),
        summary=summary,
    )


def _metrics_dict(report) -> dict:
    data = asdict(report)
    data.pop("eye_height")
    data.pop("eye_width")
    return data


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SimulationRequest) -> SweepResponse:
    cfg = _build_config(req)
    t0 = time.perf_counter()
    try:
        rows = run_sweep(cfg)
    except (ConfigError, SeriesTooShortError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    summary = invocation_summary("sweep", cfg, [], time.perf_counter() - t0)
    return SweepResponse(
        rows=[SweepRowModel(**asdict(row)) for row in rows],
        csv=sweep_rows_to_csv(rows),
        summary=summary,
    )


@app.post("/curves", response_model=CurvesResponse)
def curves(req: CurvesRequest) -> CurvesResponse:
    t0 = time.perf_counter()
    try:
        geom = ChannelGeometry(r=req.r, d=req.d)
        csv_text = channel_curves_csv(geom, req.diffusion_coefficients, req.t_max, req.dt)
    except (ConfigError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    summary = invocation_summary("curves", None, [], time.perf_counter() - t0)
    return CurvesResponse(csv=csv_text, summary=summary)


@app.post("/eye", response_model=EyeResponse)
def eye(req: EyeRequest) -> EyeResponse:
    cfg = _build_config(req)
    t0 = time.perf_counter()
    try:
        eye_proposed, eye_fixed, span = run_eye(cfg, req.run_index, span=req.span)
    except (UndefinedEyeError, SeriesTooShortError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    summary = invocation_summary("eye", cfg, [], time.perf_counter() - t0)
    return EyeResponse(
        eye_height_proposed=eye_proposed.eye_height,
        eye_width_proposed=eye_proposed.eye_width,
        eye_height_fixed=eye_fixed.eye_height,
        eye_width_fixed=eye_fixed.eye_width,
        span=span,
        csv_proposed=_eye_csv(eye_proposed),
        csv_fixed=_eye_csv(eye_fixed),
        summary=summary,
    )
