"""Command-line front end: a thin client over the service layer.

Every command validates one shared RunConfig (JSON config file plus flag
overrides; flags win), runs the corresponding service job either in-process
or against a running service (--server URL), and writes CSV/JSON outputs
with a metadata header (tool version, config hash, seed) plus the fully
resolved config, so identical config + seed reproduces byte-identical
files.

Exit codes: 0 success, 2 config error, 3 numerical-contract violation.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .spincore import ContractError
from .service import jobs
from .service import schemas as sch

_ENDPOINTS = {
    "bands": (jobs.run_bands, sch.BandsResponse),
    "spectrum": (jobs.run_spectrum, sch.SpectrumResponse),
    "qpt": (jobs.run_qpt, sch.QPTResponse),
    "fidelity": (jobs.run_fidelity, sch.FidelityResponse),
    "timing": (jobs.run_timing, sch.TimingResponse),
    "winding": (jobs.run_winding, sch.WindingResponse),
}


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _parse_range(text: str, flag: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        _fail(2, f"{flag} must be min:max:steps, got {text!r}")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        _fail(2, f"{flag} must be min:max:steps with numeric fields, got {text!r}")


def _parse_floats(text: str, flag: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        _fail(2, f"{flag} must be a comma-separated float list, got {text!r}")


def _parse_ints(text: str, flag: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        _fail(2, f"{flag} must be a comma-separated int list, got {text!r}")


def _execute(command: str, config_path: str | None, overrides: dict,
             out: str, server: str | None):
    try:
        config = load_config(config_path, overrides)
    except ConfigError as exc:
        _fail(2, str(exc))
    run, response_model = _ENDPOINTS[command]
    if server is not None:
        response = _remote(command, config, response_model, server)
    else:
        try:
            response = run(config)
        except ContractError as exc:
            _fail(3, str(exc))
        except ValueError as exc:
            _fail(2, str(exc))
    _write_outputs(command, config, response, Path(out))
    return response


def _remote(command: str, config: RunConfig, response_model, server: str):
    import httpx

    url = f"{server.rstrip('/')}/v1/{command}"
    reply = httpx.post(url, json=config.model_dump(), timeout=600.0)
    if reply.status_code == 422:
        _fail(2, reply.json().get("detail", reply.text))
    if reply.status_code == 409:
        _fail(3, reply.json().get("detail", reply.text))
    if reply.status_code != 200:
        _fail(3, f"service error {reply.status_code}: {reply.text}")
    return response_model.model_validate(reply.json())


def _dump_json(payload: dict, path: Path):
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_outputs(command: str, config: RunConfig, response, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(config.model_dump(), out / "config.resolved.json")
    body = response.model_dump()
    if command == "bands":
        (out / "bands.csv").write_text(body.pop("csv"))
        _dump_json(body, out / "bands.json")
        click.echo(f"bands: {response.rows} rows, min gap {response.min_gap:.6g}")
    elif command == "spectrum":
        (out / "signal.csv").write_text(body.pop("signal_csv"))
        _dump_json(body, out / "spectrum.json")
        click.echo(f"spectrum: {len(response.energies_rad_per_us)} peaks, "
                   f"resolution {response.resolution:.6g} rad/us")
    elif command == "qpt":
        for point in body["points"]:
            tag = f"{point['s']:g}".replace(".", "p")
            (out / f"qpt_bands_s{tag}.csv").write_text(point.pop("csv"))
        _dump_json(body, out / "qpt.json")
        labels = ", ".join(f"s={p.s:g}: {p.phase}" for p in response.points)
        click.echo(f"qpt: {labels}")
    elif command == "fidelity":
        _dump_json(body, out / "fidelity.json")
        fid = ", ".join(f"n={n}: {v:.4f}" for n, v in response.min_fidelity.items())
        click.echo(f"fidelity (min): {fid}; scaling exponent "
                   f"{response.scaling_exponent:.3f}")
    elif command == "timing":
        (out / "schedule.json").write_text(body.pop("schedule_json") + "\n")
        _dump_json(body, out / "timing.json")
        click.echo(f"timing: total {response.total_us:.2f} us "
                   f"(rf {response.rf_us:.2f}, mw {response.mw_us:.2f}, "
                   f"free {response.free_us:.2f})")
    elif command == "winding":
        _dump_json(body, out / "winding.json")
        click.echo(f"winding: {response.winding} (residue {response.residue:.3g})")


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="JSON config file; flags override it.")(fn)
    fn = click.option("--out", default=".", show_default=True,
                      help="Output directory.")(fn)
    fn = click.option("--seed", type=int, default=None, help="RNG seed.")(fn)
    fn = click.option("--jobs", type=int, default=None,
                      help="Worker processes (default: all cores).")(fn)
    fn = click.option("--server", default=None,
                      help="Run against a service at this base URL.")(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Thin-film TI quantum-phase-transition simulator on an NV register."""


@main.command()
@_common_options
@click.option("--A", "a", type=float, default=None, help="Spin-orbit constant.")
@click.option("--delta", type=float, default=None, help="Tunnel coupling.")
@click.option("--eps-b", type=float, default=None, help="Magnetic energy.")
@click.option("--kx", type=float, default=None)
@click.option("--ky", default=None, help="ky grid as min:max:steps.")
@click.option("--steps", type=int, default=None, help="Override ky step count.")
def bands(config_path, out, seed, jobs, server, a, delta, eps_b, kx, ky, steps):
    """Exact band scan of the film Hamiltonian (CSV)."""
    grid: dict = {}
    if ky is not None:
        lo, hi, n = _parse_range(ky, "--ky")
        grid.update(ky_min=lo, ky_max=hi, ky_steps=n)
    if steps is not None:
        grid["ky_steps"] = steps
    if kx is not None:
        grid["kx"] = kx
    overrides = {
        "ti": {k: v for k, v in (("a", a), ("delta", delta), ("eps_b", eps_b))
               if v is not None} or None,
        "grid": grid or None,
        "seed": seed,
        "jobs": jobs,
    }
    _execute("bands", config_path, overrides, out, server)


@main.command()
@_common_options
@click.option("--s", type=float, default=None, help="Field ratio eps_b/delta.")
@click.option("--kx", type=float, default=None, help="kx in delta/A units.")
@click.option("--ky", type=float, default=None, help="ky in delta/A units.")
@click.option("--samples", type=int, default=None, help="t-grid points M.")
@click.option("--n", "n_slices", type=int, default=None, help="Trotter slices.")
@click.option("--tier", type=click.Choice(["gate", "pulse", "noisy"]), default=None)
@click.option("--exact-u", is_flag=True, default=None,
              help="Exact-exponential controlled-U reference mode.")
@click.option("--state", default=None,
              help="Input state: eigenstate index 0-3 or 'random'.")
@click.option("--shots", type=int, default=None, help="Readout shot sampling.")
@click.option("--t2-star", type=float, default=None, help="T2e* (us, noisy tier).")
@click.option("--readout", type=click.Choice(["xy", "x"]), default=None)
def spectrum(config_path, out, seed, jobs, server, s, kx, ky, samples, n_slices,
             tier, exact_u, state, shots, t2_star, readout):
    """Run the eigenvalue algorithm and extract the spectrum."""
    input_state = None
    if state is not None:
        if state == "random":
            input_state = {"mode": "random"}
        else:
            try:
                input_state = {"mode": "eigenstate", "index": int(state)}
            except ValueError:
                _fail(2, f"--state must be an index 0-3 or 'random', got {state!r}")
    momentum = {k: v for k, v in (("kx", kx), ("ky", ky)) if v is not None}
    plan = {k: v for k, v in (("samples", samples), ("n", n_slices))
            if v is not None}
    overrides = {
        "s": s,
        "momentum": momentum or None,
        "plan": plan or None,
        "tier": tier,
        "exact_u": exact_u,
        "input_state": input_state,
        "shots": shots,
        "noise": {"t2_star_e": t2_star} if t2_star is not None else None,
        "readout": readout,
        "seed": seed,
        "jobs": jobs,
    }
    _execute("spectrum", config_path, overrides, out, server)


@main.command()
@_common_options
@click.option("--s", "s_values", default=None,
              help="Comma-separated field ratios, e.g. 0.57,1,1.43.")
@click.option("--ky", default=None, help="ky grid as min:max:steps (delta/A units).")
@click.option("--samples", type=int, default=None)
@click.option("--n", "n_slices", type=int, default=None)
@click.option("--tier", type=click.Choice(["gate", "pulse", "noisy"]), default=None)
@click.option("--exact-u", is_flag=True, default=None)
def qpt(config_path, out, seed, jobs, server, s_values, ky, samples, n_slices,
        tier, exact_u):
    """Scan the field ratio and classify the phase from extracted bands."""
    grid = {}
    if ky is not None:
        lo, hi, n = _parse_range(ky, "--ky")
        grid.update(ky_min=lo, ky_max=hi, ky_steps=n)
    plan = {k: v for k, v in (("samples", samples), ("n", n_slices))
            if v is not None}
    overrides = {
        "s_values": _parse_floats(s_values, "--s") if s_values else None,
        "grid": grid or None,
        "plan": plan or None,
        "tier": tier,
        "exact_u": exact_u,
        "seed": seed,
        "jobs": jobs,
    }
    _execute("qpt", config_path, overrides, out, server)


@main.command()
@_common_options
@click.option("--n", "n_values", default=None,
              help="Comma-separated Trotter slice counts, e.g. 2,4,8.")
def fidelity(config_path, out, seed, jobs, server, n_values):
    """Sweep Trotter fidelity against the exact evolution."""
    overrides = {
        "n_values": _parse_ints(n_values, "--n") if n_values else None,
        "seed": seed,
        "jobs": jobs,
    }
    _execute("fidelity", config_path, overrides, out, server)


@main.command()
@_common_options
@click.option("--n", "n_slices", type=int, default=None, help="Trotter slices.")
@click.option("--s", type=float, default=None, help="Field ratio.")
@click.option("--durations", type=click.Choice(["defaults", "physical"]),
              default=None)
def timing(config_path, out, seed, jobs, server, n_slices, s, durations):
    """Timing budget of the full run schedule."""
    overrides = {
        "plan": {"n": n_slices} if n_slices is not None else None,
        "s": s,
        "durations": durations,
        "seed": seed,
        "jobs": jobs,
    }
    _execute("timing", config_path, overrides, out, server)


@main.command()
@_common_options
@click.option("--s", type=float, default=None, help="Field ratio (needs > 1).")
@click.option("--center-ky", type=float, default=None,
              help="Loop center; default is the +ky Dirac point.")
@click.option("--radius", type=float, default=None)
@click.option("--points", type=int, default=None, help="Loop discretization.")
@click.option("--band", type=int, default=None, help="Band index 0-3.")
def winding(config_path, out, seed, jobs, server, s, center_ky, radius, points,
            band):
    """Wilson-loop winding number around a momentum-space loop."""
    section = {k: v for k, v in (("s", s), ("center_ky", center_ky),
                                 ("radius", radius), ("points", points),
                                 ("band", band)) if v is not None}
    overrides = {"winding": section or None, "seed": seed, "jobs": jobs}
    _execute("winding", config_path, overrides, out, server)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the simulation service."""
    import uvicorn

    uvicorn.run("nvsim.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
