"""Pydantic request/response models for the simulation service.

SimulationRequest mirrors the flat experiment config: the same keys, the same
defaults, and unknown keys rejected.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class SimulationRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    D_A: float = 79.4
    D_B: float = 158.8
    r: float = 2.0
    d: float = 4.0
    T_s: float = 0.38
    sigma2_symbol: float = 0.0
    delta_t: float = 1e-5
    K: int = 10_000
    N_info: int = 1000
    N_sync: int = 1000
    p_one: float = 0.5
    snr_db: float | None = None
    smooth_window: int | None = None
    gate_fraction: float = 0.45
    refractory_fraction: float = 0.40
    search_horizon: float = 1.6
    threshold_mode: str = "literal"
    e_bar_target: float = 0.0
    backend: str = "analytic_sample"
    runs: int = 20
    seed: int = 0
    sweep_param: str | None = None
    sweep_values: list[float] | None = None
    full_scale: bool = False

    def config_mapping(self) -> dict:
        data = self.model_dump()
        data.pop("full_scale")
        return data


class RunRequest(SimulationRequest):
    run_index: int = 0

    def config_mapping(self) -> dict:
        data = super().config_mapping()
        data.pop("run_index")
        return data


class EyeRequest(SimulationRequest):
    run_index: int = 0
    span: float | None = Field(default=None, description="trace span (s); default min duration")

    def config_mapping(self) -> dict:
        data = super().config_mapping()
        data.pop("run_index")
        data.pop("span")
        return data


class CurvesRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    r: float = 4.0
    d: float = 4.0
    diffusion_coefficients: list[float] = Field(default=[79.4, 158.8, 520.0])
    t_max: float = 0.4
    dt: float = 1e-5


class MetricsModel(BaseModel):
    ser: float
    e_bar: float
    erasure_rate: float
    n_symbols: int


class SummaryModel(BaseModel):
    command: str
    package_version: str
    numpy_version: str
    wall_time_s: float
    outputs: list[str]
    created_unix: int
    config_fingerprint: str | None = None
    threshold_mode: str | None = None
    threshold: float | None = None


class RunResponse(BaseModel):
    proposed: MetricsModel
    baseline: MetricsModel
    summary: SummaryModel


class SweepRowModel(BaseModel):
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


class SweepResponse(BaseModel):
    rows: list[SweepRowModel]
    csv: str
    summary: SummaryModel


class CurvesResponse(BaseModel):
    csv: str
    summary: SummaryModel


class EyeResponse(BaseModel):
    eye_height_proposed: float
    eye_width_proposed: float
    eye_height_fixed: float
    eye_width_fixed: float
    span: float
    csv_proposed: str
    csv_fixed: str
    summary: SummaryModel


class HealthResponse(BaseModel):
    status: str
    version: str
