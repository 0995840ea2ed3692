"""One run-configuration schema shared by every command and endpoint.

Unknown keys are rejected; every command validates the sections it uses
against module preconditions before doing any work. A run's fully-resolved
config is written next to its outputs, and the sha256 of its canonical JSON
is stamped into every output file so identical config + seed reproduces
byte-identical results.
"""

from __future__ import annotations

import hashlib
import json

from pydantic import BaseModel, ConfigDict, Field, field_validator

from . import __version__

TOOL_NAME = "nvsim"


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 2)."""


class TISection(BaseModel):
    """Film parameters for the oracle commands (raw rad/us units)."""

    model_config = ConfigDict(extra="forbid")

    a: float = 1.0
    delta: float = 1.0
    eps_b: float = 0.57


class GridSection(BaseModel):
    """ky grid (bands/qpt); simulation commands read ky in delta/A units."""

    model_config = ConfigDict(extra="forbid")

    kx: float = 0.0
    ky_min: float = -2.0
    ky_max: float = 2.0
    ky_steps: int = 41


class MomentumSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kx: float = 0.0
    ky: float = 1.0


class PlanSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = 2
    samples: int = 256

    @field_validator("n")
    @classmethod
    def _n_min(cls, v):
        if v < 1:
            raise ValueError("n >= 1 required")
        return v

    @field_validator("samples")
    @classmethod
    def _samples_min(cls, v):
        if v < 2:
            raise ValueError("samples >= 2 required")
        return v


class InputStateSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: str = "eigenstate"
    index: int = 0
    amplitudes: list[list[float]] | None = None
    seed: int = 0


class NoiseSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t2_star_e: float = 3.0
    t2_e: float = 200.0
    mc_samples: int = 100
    t2e_envelope: bool = False


class WindingSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    s: float = 1.43
    center_kx: float = 0.0
    center_ky: float | None = None  # None: the +ky Dirac point
    radius: float = 0.3
    points: int = 200
    band: int = 1


class RunConfig(BaseModel):
    """The one schema shared by bands, spectrum, qpt, fidelity, timing, winding."""

    model_config = ConfigDict(extra="forbid")

    ti: TISection = Field(default_factory=TISection)
    grid: GridSection = Field(default_factory=GridSection)
    momentum: MomentumSection = Field(default_factory=MomentumSection)
    plan: PlanSection = Field(default_factory=PlanSection)
    input_state: InputStateSection = Field(default_factory=InputStateSection)
    noise: NoiseSection = Field(default_factory=NoiseSection)
    winding: WindingSection = Field(default_factory=WindingSection)
    s: float = 1.0
    s_values: list[float] = Field(default_factory=lambda: [0.57, 1.0, 1.43])
    n_values: list[int] = Field(default_factory=lambda: [2])
    tier: str = "gate"
    exact_u: bool = False
    readout: str = "xy"
    shots: int | None = None
    durations: str = "defaults"
    seed: int = 0
    jobs: int | None = None

    @field_validator("tier")
    @classmethod
    def _tier_known(cls, v):
        if v not in ("gate", "pulse", "noisy"):
            raise ValueError("tier must be one of gate, pulse, noisy")
        return v

    @field_validator("readout")
    @classmethod
    def _readout_known(cls, v):
        if v not in ("xy", "x"):
            raise ValueError("readout must be 'xy' or 'x'")
        return v

    @field_validator("durations")
    @classmethod
    def _durations_known(cls, v):
        if v not in ("defaults", "physical"):
            raise ValueError("durations must be 'defaults' or 'physical'")
        return v


def canonical_json(config: RunConfig) -> str:
    return json.dumps(config.model_dump(), sort_keys=True, separators=(",", ":"))


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def metadata(config: RunConfig) -> dict:
    return {
        "tool": TOOL_NAME,
        "version": __version__,
        "config_hash": config_hash(config),
        "seed": config.seed,
    }


def metadata_lines(config: RunConfig) -> tuple[str, ...]:
    md = metadata(config)
    return tuple(f"{k}: {md[k]}" for k in ("tool", "version", "config_hash", "seed"))


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Config file plus flag overrides; flags win. Raises ConfigError."""
    data: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    data = _deep_merge(data, overrides)
    try:
        return RunConfig.model_validate(data)
    except Exception as exc:
        raise ConfigError(str(exc)) from exc


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out
