"""FastAPI front end over the service layer.

POST endpoints mirror the CLI commands one-to-one and take the shared
RunConfig as their request body. Config validation errors surface as 422
(FastAPI's default for request models); numerical-contract violations as
409 with the failure message.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import RunConfig, TOOL_NAME
from ..spincore import ContractError
from . import jobs
from . import schemas as sch

app = FastAPI(title="nvsim service", version=__version__)


def _run(fn, config: RunConfig):
    try:
        return fn(config)
    except ContractError as exc:
        raise HTTPException(status_code=409, detail=str(exc)) from exc
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/v1/health", response_model=sch.HealthResponse)
def health() -> sch.HealthResponse:
    return sch.HealthResponse(status="ok", tool=TOOL_NAME, version=__version__)


@app.post("/v1/bands", response_model=sch.BandsResponse)
def bands(config: RunConfig) -> sch.BandsResponse:
    return _run(jobs.run_bands, config)


@app.post("/v1/spectrum", response_model=sch.SpectrumResponse)
def spectrum(config: RunConfig) -> sch.SpectrumResponse:
    return _run(jobs.run_spectrum, config)


@app.post("/v1/qpt", response_model=sch.QPTResponse)
def qpt(config: RunConfig) -> sch.QPTResponse:
    return _run(jobs.run_qpt, config)


@app.post("/v1/fidelity", response_model=sch.FidelityResponse)
def fidelity(config: RunConfig) -> sch.FidelityResponse:
    return _run(jobs.run_fidelity, config)


@app.post("/v1/timing", response_model=sch.TimingResponse)
def timing(config: RunConfig) -> sch.TimingResponse:
    return _run(jobs.run_timing, config)


@app.post("/v1/winding", response_model=sch.WindingResponse)
def winding(config: RunConfig) -> sch.WindingResponse:
    return _run(jobs.run_winding, config)
