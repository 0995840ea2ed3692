"""The service layer: one pure function per command.

Each takes a validated RunConfig and returns a response model. The CLI
calls these in-process; the FastAPI app exposes them over HTTP. Results
are deterministic for a fixed config (the seed is part of it).
"""

from __future__ import annotations

import math
import os

import numpy as np

from .. import nvmachine as nv
from .. import spectroscopy as spec
from .. import timodel as ti
from .. import trotter as trot
from ..config import RunConfig, metadata, metadata_lines
from ..nvmachine import NVParams, NoiseModel
from . import schemas as sch


def _meta(config: RunConfig) -> sch.Meta:
    return sch.Meta(**metadata(config))


def _resolve_jobs(config: RunConfig) -> int:
    return config.jobs if config.jobs else (os.cpu_count() or 1)


def _input_spec(config: RunConfig) -> spec.InputStateSpec:
    sec = config.input_state
    amps = None
    if sec.amplitudes is not None:
        amps = tuple(complex(re, im) for re, im in sec.amplitudes)
    return spec.InputStateSpec(sec.mode, index=sec.index, amplitudes=amps,
                               seed=sec.seed)


def _noise(config: RunConfig) -> NoiseModel:
    n = config.noise
    return NoiseModel(t2_star_e=n.t2_star_e, t2_e=n.t2_e,
                      mc_samples=n.mc_samples, seed=config.seed,
                      t2e_envelope=n.t2e_envelope)


def run_bands(config: RunConfig) -> sch.BandsResponse:
    p = ti.TIParams(config.ti.a, config.ti.delta, config.ti.eps_b)
    g = config.grid
    table = ti.band_scan(p, g.kx, (g.ky_min, g.ky_max, g.ky_steps))
    csv = table.to_csv(metadata_lines(config))
    return sch.BandsResponse(meta=_meta(config), csv=csv,
                             min_gap=table.min_middle_gap(), rows=g.ky_steps)


def run_spectrum(config: RunConfig) -> sch.SpectrumResponse:
    nvp = NVParams()
    delta = nvp.delta_eff
    p = ti.TIParams(delta, delta, config.s * delta)
    k = ti.Momentum(config.momentum.kx, config.momentum.ky)
    noise = _noise(config) if config.tier == "noisy" else None
    sig = spec.run_signal(
        _input_spec(config), p, k,
        t_grid=spec.default_t_grid(p, k, config.plan.samples),
        tier=config.tier, n_slices=config.plan.n, exact_u=config.exact_u,
        nvp=nvp, noise=noise, shots=config.shots, shots_seed=config.seed,
        readout=config.readout)
    result = spec.extract_spectrum(sig)
    return sch.SpectrumResponse(
        meta=_meta(config),
        signal_csv=sig.to_csv(metadata_lines(config)),
        energies_rad_per_us=[pk.energy for pk in result.peaks],
        weights=[pk.weight for pk in result.peaks],
        resolution=result.resolution,
        window=result.window,
        diagnostic=result.diagnostic,
    )


def run_qpt(config: RunConfig) -> sch.QPTResponse:
    g = config.grid
    ky_values = np.linspace(g.ky_min, g.ky_max, g.ky_steps)
    scan = spec.qpt_scan(config.s_values, ky_values,
                         samples=config.plan.samples, tier=config.tier,
                         n_slices=config.plan.n, exact_u=config.exact_u,
                         jobs=_resolve_jobs(config))
    points = [
        sch.QPTPoint(s=pt.s, phase=pt.phase, min_gap=pt.min_gap,
                     dirac_count=pt.dirac_count,
                     csv=pt.band_table.to_csv(
                         metadata_lines(config) + (f"s: {pt.s}",)))
        for pt in scan.points
    ]
    return sch.QPTResponse(meta=_meta(config), resolution=scan.resolution,
                           points=points)


def run_fidelity(config: RunConfig) -> sch.FidelityResponse:
    report = trot.fidelity_sweep(n_values=tuple(config.n_values))
    d = report.to_json_dict()
    return sch.FidelityResponse(
        meta=_meta(config),
        n_values=d["n_values"],
        min_fidelity=d["min_fidelity"],
        mean_fidelity=d["mean_fidelity"],
        scaling_distance=d["scaling_distance"],
        scaling_exponent=d["scaling_exponent"],
        grid=d["grid"],
    )


def run_timing(config: RunConfig) -> sch.TimingResponse:
    schedule = spec.algorithm_schedule(n_slices=config.plan.n, s=config.s,
                                       durations=config.durations)
    report = nv.schedule_timing(schedule)
    return sch.TimingResponse(
        meta=_meta(config),
        total_us=report.total_us,
        rf_us=report.rf_us,
        mw_us=report.mw_us,
        free_us=report.free_us,
        by_kind=report.by_kind,
        schedule_json=schedule.to_json(),
    )


def run_winding(config: RunConfig) -> sch.WindingResponse:
    w = config.winding
    p = ti.TIParams(1.0, 1.0, w.s)
    if w.center_ky is None:
        if w.s <= 1.0:
            raise ValueError(
                "winding.center_ky must be given for s <= 1 (no Dirac point)")
        center_ky = math.sqrt(w.s ** 2 - 1.0)
    else:
        center_ky = w.center_ky
    loop = ti.circle_loop((w.center_kx, center_ky), w.radius, w.points)
    result = ti.winding_number(p, loop, band=w.band)
    return sch.WindingResponse(
        meta=_meta(config), winding=result.winding,
        berry_phase=result.berry_phase, residue=result.residue,
        center=[w.center_kx, center_ky], radius=w.radius)
