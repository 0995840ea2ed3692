"""Response models for the simulation service (requests are RunConfig)."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict

from ..config import RunConfig  # noqa: F401  (the shared request schema)


class Meta(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tool: str
    version: str
    config_hash: str
    seed: int


class BandsResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")

    meta: Meta
    csv: str
    min_gap: float
    rows: int


class SpectrumResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")

    meta: Meta
    signal_csv: str
    energies_rad_per_us: list[float]
    weights: list[float]
    resolution: float
    window: str
    diagnostic: str


class QPTPoint(BaseModel):
    model_config = ConfigDict(extra="forbid")

    s: float
    phase: str
    min_gap: float
    dirac_count: int
    csv: str


class QPTResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")

    meta: Meta
    resolution: float
    points: list[QPTPoint]


class FidelityResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")

    meta: Meta
    n_values: list[int]
    min_fidelity: dict[str, float]
    mean_fidelity: dict[str, float]
    scaling_distance: dict[str, float]
    scaling_exponent: float
    grid: dict


class TimingResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")

    meta: Meta
    total_us: float
    rf_us: float
    mw_us: float
    free_us: float
    by_kind: dict[str, float]
    schedule_json: str


class WindingResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")

    meta: Meta
    winding: int
    berry_phase: float
    residue: float
    center: list[float]
    radius: float


class HealthResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")

    status: str
    tool: str
    version: str
