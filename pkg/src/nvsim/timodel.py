"""Exact physics of the thin-film topological insulator in a parallel field.

The two-surface film Hamiltonian on the sigma (x) tau space is

    H(k) = A (ky sx - kx sy) tz - eps_b sx + delta tx

with sigma the real spin, tau the surface-layer pseudospin, delta the
inter-surface tunnel coupling and eps_b the in-plane magnetic energy.
Everything here is closed-form or plain dense diagonalization; this module
is the independent oracle that the quantum-simulation pipeline is checked
against.

At kx = 0 the spectrum factorizes into {s*sqrt(A^2 ky^2 + delta^2) - sg*eps_b}
for s, sg in {+1, -1}: the gap closes iff eps_b >= delta, with crossings at
ky = +-sqrt(eps_b^2 - delta^2)/A, which is the field-driven transition from
an insulating film (no Dirac points) to a semimetal (two Dirac points).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import constants as _const

from .spincore import (
    HilbertSpace,
    Operator,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    ID2,
)

SIGMA_TAU_SPACE = HilbertSpace((2, 2))

INSULATING = "insulating"
CRITICAL = "critical"
SEMIMETALLIC = "semimetallic"


@dataclass(frozen=True)
class TIParams:
    """Film parameters: spin-orbit constant A, tunnel coupling delta, magnetic energy eps_b.

    All in rad/us (A in rad/us per unit inverse length, so A*k carries rad/us).
    """

    A: float
    delta: float
    eps_b: float

    def __post_init__(self):
        if not (self.A > 0 and self.delta > 0 and self.eps_b >= 0):
            raise ValueError(
                f"need A > 0, delta > 0, eps_b >= 0; got "
                f"A={self.A}, delta={self.delta}, eps_b={self.eps_b}")

    @property
    def s_ratio(self) -> float:
        return self.eps_b / self.delta


@dataclass(frozen=True)
class Momentum:
    kx: float
    ky: float

    def __post_init__(self):
        if not (math.isfinite(self.kx) and math.isfinite(self.ky)):
            raise ValueError(f"momentum must be finite, got ({self.kx}, {self.ky})")

    @property
    def magnitude(self) -> float:
        return math.hypot(self.kx, self.ky)


def build_h_ti(p: TIParams, k: Momentum) -> Operator:
    """The 4x4 film Hamiltonian on sigma (x) tau."""
    m = (p.A * k.ky * np.kron(PAULI_X, PAULI_Z)
         - p.A * k.kx * np.kron(PAULI_Y, PAULI_Z)
         - p.eps_b * np.kron(PAULI_X, ID2)
         + p.delta * np.kron(ID2, PAULI_X))
    return Operator(SIGMA_TAU_SPACE, m)


@dataclass(frozen=True)
class Spectrum:
    """Four sorted eigenvalues plus whether the closed form was used."""

    energies: np.ndarray
    closed_form: bool


def spectrum_exact(p: TIParams, k: Momentum) -> Spectrum:
    """Sorted eigenvalues; closed form at kx = 0, numeric diagonalization otherwise."""
    if k.kx == 0.0:
        f = math.hypot(p.A * k.ky, p.delta)
        e = np.sort([s * f - sg * p.eps_b for s in (1, -1) for sg in (1, -1)])
        return Spectrum(e, True)
    e = np.linalg.eigvalsh(build_h_ti(p, k).matrix)
    return Spectrum(e, False)


def middle_gap(p: TIParams, ky: float, kx: float = 0.0) -> float:
    """E3 - E2 at the given momentum."""
    e = spectrum_exact(p, Momentum(kx, ky)).energies
    return float(e[2] - e[1])


@dataclass(frozen=True)
class BandTable:
    """Band energies versus ky at fixed kx, rows sorted by ky."""

    kx: float
    ky: np.ndarray
    energies: np.ndarray  # shape (n, 4), each row sorted ascending

    def __post_init__(self):
        if np.any(np.diff(self.ky) <= 0):
            raise ValueError("ky rows must be strictly increasing")
        if self.energies.shape != (self.ky.size, 4):
            raise ValueError(f"energies shape {self.energies.shape} invalid")

    def min_middle_gap(self) -> float:
        return float((self.energies[:, 2] - self.energies[:, 1]).min())

    def to_csv(self, header_lines: tuple[str, ...] = ()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        buf.write("ky,E1,E2,E3,E4\n")
        for i in range(self.ky.size):
            row = ",".join(f"{x:.12g}" for x in self.energies[i])
            buf.write(f"{self.ky[i]:.12g},{row}\n")
        return buf.getvalue()


def band_scan(p: TIParams, kx: float, ky_range: tuple[float, float, int]) -> BandTable:
    """Scan sorted eigenvalues over a uniform ky grid at fixed kx."""
    lo, hi, steps = ky_range
    steps = int(steps)
    if steps < 2:
        raise ValueError("steps >= 2 required in ky_range")
    if not hi > lo:
        raise ValueError(f"empty ky range [{lo}, {hi}]")
    ky = np.linspace(lo, hi, steps)
    energies = np.empty((steps, 4))
    for i, y in enumerate(ky):
        energies[i] = spectrum_exact(p, Momentum(kx, y)).energies
    return BandTable(kx, ky, energies)


def _golden_minimize(f, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 200):
    """Golden-section minimization on [lo, hi]; returns (x, f(x))."""
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def dirac_points(p: TIParams) -> list[Momentum]:
    """Gap-closing momenta on the kx = 0 line.

    Empty for eps_b < delta, {ky = 0} at the critical point, and
    {+-sqrt(eps_b^2 - delta^2)/A} in the semimetallic phase. Closed-form
    locations are confirmed by golden-section minimization of the gap.
    """
    tol = 1e-6 * p.delta
    if p.eps_b < p.delta - tol:
        return []
    if abs(p.eps_b - p.delta) <= tol:
        candidates = [0.0]
    else:
        ky0 = math.sqrt(p.eps_b ** 2 - p.delta ** 2) / p.A
        candidates = [-ky0, +ky0]
    points = []
    for ky0 in candidates:
        width = max(0.2 * abs(ky0), 0.1 * p.delta / p.A)
        ky_min, gap = _golden_minimize(
            lambda y: middle_gap(p, y), ky0 - width, ky0 + width)
        if abs(gap) > 1e-8:
            raise RuntimeError(
                f"numeric confirmation failed at ky={ky0}: residual gap {gap:.3e}")
        points.append(Momentum(0.0, ky_min))
    return points


@dataclass(frozen=True)
class GapResult:
    gap: float
    phase: str


def minimal_gap(p: TIParams) -> GapResult:
    """Minimum of E3 - E2 over ky at kx = 0, with the phase label.

    Equals 2*max(0, delta - eps_b): the closed form follows from the kx = 0
    spectrum; the numeric path scans a grid and golden-refines the minimum.
    """
    span = (p.eps_b + 2 * p.delta) / p.A
    grid = np.linspace(-span, span, 201)
    gaps = [middle_gap(p, y) for y in grid]
    i = int(np.argmin(gaps))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    _, gap = _golden_minimize(lambda y: middle_gap(p, y), lo, hi)
    gap = max(gap, 0.0)
    tol = 1e-6 * p.delta
    if abs(p.eps_b - p.delta) <= tol:
        phase = CRITICAL
    elif p.eps_b < p.delta:
        phase = INSULATING
    else:
        phase = SEMIMETALLIC
    return GapResult(gap, phase)


def circle_loop(center: tuple[float, float], radius: float, n_points: int = 200) -> np.ndarray:
    """Counterclockwise circular polyline (closed implicitly; no repeated endpoint)."""
    th = np.linspace(0, 2 * np.pi, n_points, endpoint=False)
    return np.column_stack([center[0] + radius * np.cos(th),
                            center[1] + radius * np.sin(th)])


@dataclass(frozen=True)
class WindingResult:
    winding: int
    berry_phase: float
    residue: float


def winding_number(p: TIParams, loop: np.ndarray, band: int = 1) -> WindingResult:
    """Discrete Berry phase of one band around a closed momentum-space loop.

    Wilson-loop product of nearest-neighbor eigenvector overlaps; the phase
    of the product divided by pi, rounded to an integer. The rounding
    residue is returned as a quality metric and must be <= 0.05. A loop
    around a single Dirac cone gives +-1; a contractible loop in the gapped
    region, or one enclosing both cones, gives 0.
    """
    loop = np.asarray(loop, dtype=float)
    if loop.ndim != 2 or loop.shape[1] != 2 or loop.shape[0] < 3:
        raise ValueError("loop must be an (N, 2) array of vertices with N >= 3")
    n = loop.shape[0]
    gap_tol = 1e-6 * p.delta
    vecs = np.empty((n, 4), dtype=complex)
    for i, (kx, ky) in enumerate(loop):
        w, v = np.linalg.eigh(build_h_ti(p, Momentum(kx, ky)).matrix)
        neighbor_gap = min(
            w[band + 1] - w[band] if band + 1 < 4 else np.inf,
            w[band] - w[band - 1] if band - 1 >= 0 else np.inf,
        )
        if neighbor_gap <= gap_tol:
            raise ValueError(
                f"loop passes through a band degeneracy at k=({kx}, {ky}); "
                f"move the loop away from the Dirac points")
        vecs[i] = v[:, band]
    product = 1.0 + 0j
    for i in range(n):
        product *= np.vdot(vecs[i], vecs[(i + 1) % n])
    if abs(product) < 1e-12:
        raise ValueError("Wilson-loop overlaps vanished; refine the discretization")
    phase = float(np.angle(product))
    w_int = int(round(phase / np.pi))
    residue = abs(phase / np.pi - w_int)
    if residue > 0.05:
        raise ValueError(
            f"winding residue {residue:.3f} exceeds 0.05; "
            f"use a finer loop discretization")
    return WindingResult(w_int, phase, residue)


@dataclass(frozen=True)
class PhysicalFieldParams:
    """Physical-unit inputs for the magnetic energy.

    b_field in Tesla, thickness d in nm, Fermi velocity v_f in nm/us, and
    the Zeeman mass parameter in kg (its physical meaning is left to the
    caller; zeeman_disabled drops the term entirely, the m -> infinity limit).
    """

    b_field: float
    d: float
    v_f: float
    mass_kg: float = _const.m_e
    zeeman_disabled: bool = False

    def __post_init__(self):
        if self.b_field <= 0:
            raise ValueError(f"b_field must be > 0 Tesla, got {self.b_field}")
        if self.d <= 0 or self.v_f <= 0:
            raise ValueError("thickness and Fermi velocity must be positive")
        if not self.zeeman_disabled and self.mass_kg <= 0:
            raise ValueError("mass_kg must be positive")

    @property
    def magnetic_length_nm(self) -> float:
        # l = sqrt(hbar / (e B)), recomputed on demand so it can never go stale
        return math.sqrt(_const.hbar / (_const.e * self.b_field)) * 1e9


@dataclass(frozen=True)
class MagneticEnergy:
    """eps_b = v_f * |q_B| in rad/us, with the sign of q_B kept explicit."""

    eps_b: float
    q_b_sign: int
    q_b: float           # 1/nm, signed
    magnetic_length_nm: float


def magnetic_energy(f: PhysicalFieldParams) -> MagneticEnergy:
    """Convert field/thickness/velocity to the magnetic energy scale.

    q_B = d/(2 l^2) - hbar/(2 m v_f l^2); the first term is the
    Aharonov-Bohm phase gradient across the film, the second the Zeeman
    contribution. The result can be negative for thin films or heavy
    fields; |q_B| is used as eps_b and the sign is reported rather than
    silently absorbed.
    """
    l2 = f.magnetic_length_nm ** 2  # nm^2
    ab_term = f.d / (2 * l2)        # 1/nm
    if f.zeeman_disabled:
        zeeman_term = 0.0
    else:
        # hbar/(2 m v_f l^2) with v_f in nm/us and l^2 in nm^2 -> 1/nm
        zeeman_term = _const.hbar * 1e12 / (2 * f.mass_kg * f.v_f * l2)
    q_b = ab_term - zeeman_term
    return MagneticEnergy(
        eps_b=f.v_f * abs(q_b),
        q_b_sign=1 if q_b >= 0 else -1,
        q_b=q_b,
        magnetic_length_nm=f.magnetic_length_nm,
    )
