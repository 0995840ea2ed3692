"""The physical three-spin register: electron (S=1) + 13C (I=1/2) + 14N (I=1).

Static Hamiltonian (rad/us, basis electron mS in {+1,0,-1} (x) 13C mC in
{+1/2,-1/2} (x) 14N mN in {+1,0,-1}):

    H0 = D Sz^2 + ge B0 Sz - gc B0 Cz - gn B0 Nz + Q Nz^2 + Jc Sz Cz + Jn Sz Nz

All terms commute, so H0 is diagonal in the product basis. The simulation
uses the mS in {0, 1} electron levels as one qubit (sigma), the 13C spin as
the second (tau), and the mN in {0, +1} nitrogen levels as the readout
ancilla. Restricted to that subspace the hyperfine term splits as

    Jc Sz Cz -> (Jc/4) sigma_z tau_z + (Jc/4) tau_z,

fixing the simulated tunnel coupling delta = Jc/4. Pulse-tier propagators
are built in the interaction frame of the diagonal H0 with the
(Jc/4) sigma_z tau_z residual kept as the dynamical resource; the local
(Jc/4) tau_z by-term and all single-spin frequencies are absorbed into the
frame (the software Z-frame). Timed rotations are modeled as calibrated
ideal rotations (the rapid-flip echo the protocol inserts into every
nuclear pulse suspends the residual there); raw drive windows and free
evolutions carry the residual and the quasi-static noise detuning exactly,
and strong microwave pulses include the off-resonant mS = -1 level so
leakage is tracked rather than assumed away.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .spincore import (
    HilbertSpace,
    Operator,
    StateVector,
    ContractError,
    kron_all,
    propagator,
)

TWO_PI = 2 * math.pi

NV_SPACE = HilbertSpace((3, 2, 3))

# spin-1 operators in the {+1, 0, -1} basis
SPIN1_Z = np.diag([1.0, 0.0, -1.0]).astype(complex)
SPIN1_X = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / math.sqrt(2)
SPIN1_Y = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / math.sqrt(2)
SPIN_HALF_Z = np.diag([0.5, -0.5]).astype(complex)

# tiers
GATE = "gate"
PULSE = "pulse"
NOISY = "noisy"
TIERS = (GATE, PULSE, NOISY)

# pulse kinds
MW = "mw"                     # strong resonant microwave on the electron
MW_SELECTIVE = "mw_selective"  # microwave conditioned on a 14N level
RF_N = "rf_n"                 # radio-frequency rotation on the 14N qubit
RF_C = "rf_c"                 # radio-frequency rotation on the 13C spin
FREE = "free"                 # free evolution under the residual hyperfine
FLIP = "flip"                 # rapid non-selective electron pi flip

DEFAULT_DURATIONS = {
    MW: 0.05,
    MW_SELECTIVE: 0.5,
    RF_N: 20.0,
    RF_C: 2.0,
    FREE: 0.07,
    FLIP: 0.05,
}

RF_KINDS = (RF_N, RF_C)
MW_KINDS = (MW, MW_SELECTIVE, FLIP)


@dataclass(frozen=True)
class NVParams:
    """Register constants, rad/us (every X/2pi MHz datum times 2pi).

    Defaults reproduce the standard NV numbers: D/2pi = 2870 MHz,
    gamma_e/2pi = 2.8 MHz/G, gamma_c/2pi = 1.1 kHz/G, gamma_n/2pi =
    0.3077 kHz/G, Q/2pi = -5.1 MHz, Jc/2pi = 14 MHz, Jn/2pi = 2.1 MHz.
    B0 defaults to a 500 G working point.
    """

    d_zfs: float = TWO_PI * 2870.0
    gamma_e: float = TWO_PI * 2.8
    gamma_c: float = TWO_PI * 1.1e-3
    gamma_n: float = TWO_PI * 0.3077e-3
    quadrupole: float = TWO_PI * (-5.1)
    j_c: float = TWO_PI * 14.0
    j_n: float = TWO_PI * 2.1
    b0: float = 500.0

    def __post_init__(self):
        if self.j_c <= 0:
            raise ValueError("j_c must be positive")

    @property
    def delta_eff(self) -> float:
        """Simulated tunnel coupling delta = Jc/4."""
        return self.j_c / 4


def build_h0(p: NVParams) -> Operator:
    """The 18x18 static Hamiltonian; diagonal in the product basis."""
    h = (p.d_zfs * kron_all(NV_SPACE, [SPIN1_Z @ SPIN1_Z, None, None]).matrix
         + p.gamma_e * p.b0 * kron_all(NV_SPACE, [SPIN1_Z, None, None]).matrix
         - p.gamma_c * p.b0 * kron_all(NV_SPACE, [None, SPIN_HALF_Z, None]).matrix
         - p.gamma_n * p.b0 * kron_all(NV_SPACE, [None, None, SPIN1_Z]).matrix
         + p.quadrupole * kron_all(NV_SPACE, [None, None, SPIN1_Z @ SPIN1_Z]).matrix
         + p.j_c * kron_all(NV_SPACE, [SPIN1_Z, SPIN_HALF_Z, None]).matrix
         + p.j_n * kron_all(NV_SPACE, [SPIN1_Z, None, SPIN1_Z]).matrix)
    return Operator(NV_SPACE, h)


# basis-index helpers (electron index: 0 -> mS=+1, 1 -> mS=0, 2 -> mS=-1;
# carbon index: 0 -> mC=+1/2, 1 -> mC=-1/2; nitrogen: 0 -> mN=+1, 1 -> 0, 2 -> -1)
E_UP, E_DOWN, E_LEAK = 0, 1, 2   # sigma_z = +1 on mS=+1, -1 on mS=0
C_UP, C_DOWN = 0, 1              # tau_z = +1 on mC=+1/2
N_ONE, N_ZERO, N_MINUS = 0, 1, 2  # |1>_N = mN=+1, |0>_N = mN=0


def _full_index(e: int, c: int, n: int) -> int:
    return (e * 2 + c) * 3 + n


@dataclass(frozen=True)
class QubitEmbedding:
    """Mapping between the 18-dim register and the 8-dim computational space.

    Computational ordering is sigma (x) tau (x) N-qubit with basis index
    4*si + 2*ti + ni, where si, ti = 0 mean sigma_z, tau_z = +1 and ni = 0
    means |0>_N (mN = 0), ni = 1 means |1>_N (mN = +1). The 4-dim sigma(x)tau
    ordering matches the TI model module.
    """

    params: NVParams
    comp_indices: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        idx = []
        for si in (0, 1):
            for ti in (0, 1):
                for ni in (0, 1):
                    e = E_UP if si == 0 else E_DOWN
                    c = C_UP if ti == 0 else C_DOWN
                    n = N_ZERO if ni == 0 else N_ONE
                    idx.append(_full_index(e, c, n))
        object.__setattr__(self, "comp_indices", tuple(idx))
        self._verify_hyperfine_split()

    def _verify_hyperfine_split(self):
        """Construction self-check: Jc Sz Cz = (Jc/4)(sz tz + tz) on the subspace."""
        jc = self.params.j_c
        for si, sz in ((0, 1), (1, -1)):
            for ti, tz in ((0, 1), (1, -1)):
                m_s = 1 if si == 0 else 0
                m_c = 0.5 if ti == 0 else -0.5
                lhs = jc * m_s * m_c
                rhs = jc / 4 * (sz * tz + tz)
                if abs(lhs - rhs) > 1e-12:
                    raise ContractError("hyperfine qubit split identity failed")

    @property
    def delta_eff(self) -> float:
        return self.params.delta_eff

    def embed_state(self, amps8) -> StateVector:
        """Lift 8 computational amplitudes to the 18-dim register."""
        amps8 = np.asarray(amps8, dtype=complex).reshape(-1)
        if amps8.size != 8:
            raise ValueError("need 8 computational amplitudes")
        full = np.zeros(18, dtype=complex)
        full[list(self.comp_indices)] = amps8
        return StateVector(NV_SPACE, full)

    def project_amplitudes(self, psi: StateVector) -> tuple[np.ndarray, float]:
        """Computational amplitudes plus the leaked population."""
        amps = psi.amplitudes[list(self.comp_indices)]
        leak = 1.0 - float(np.sum(np.abs(amps) ** 2))
        return amps, max(leak, 0.0)

    def restrict_unitary(self, u: Operator) -> np.ndarray:
        """8x8 computational block of an 18-dim propagator (not exactly unitary if leaky)."""
        ix = list(self.comp_indices)
        return u.matrix[np.ix_(ix, ix)]

    def unitary_leakage(self, u: Operator) -> float:
        """Worst-case population leaving the computational subspace."""
        block = self.restrict_unitary(u)
        col_norms = np.sum(np.abs(block) ** 2, axis=0)
        return float(1.0 - col_norms.min())


def qubit_embedding(p: NVParams) -> QubitEmbedding:
    return QubitEmbedding(p)


# ---------------------------------------------------------------------------
# pulse elements and schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PulseElement:
    """One timed control element.

    Rotation elements carry `angle` (Bloch rotation angle; the drive
    amplitude is implied by angle/duration). Raw drive windows carry
    `amplitude` (B1, Gauss) with angle = 0 and realize the rotating-frame
    drive plus the residual hyperfine for their whole duration. Selective
    elements must name the target 14N level (+1 or 0).
    """

    kind: str
    duration: float
    angle: float = 0.0
    amplitude: float = 0.0
    phase: float = 0.0
    detuning: float = 0.0
    target: int | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in DEFAULT_DURATIONS:
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        if self.kind == MW_SELECTIVE and self.target is None:
            raise ValueError("selective pulses need a target 14N level")

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "duration_us": self.duration,
            "amplitude_gauss": self.amplitude,
            "phase_rad": self.phase,
            "target": self.target,
        }


@dataclass(frozen=True)
class PulseSchedule:
    elements: tuple[PulseElement, ...]
    tier: str = PULSE

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")
        object.__setattr__(self, "elements", tuple(self.elements))

    @property
    def total_duration(self) -> float:
        return sum(e.duration for e in self.elements)

    def to_json(self) -> str:
        return json.dumps([e.to_json_dict() for e in self.elements], indent=2)

    def with_tier(self, tier: str) -> "PulseSchedule":
        return replace(self, tier=tier)


@dataclass(frozen=True)
class TimingReport:
    total_us: float
    rf_us: float
    mw_us: float
    free_us: float
    by_kind: dict

    def to_json_dict(self) -> dict:
        return {
            "total_us": self.total_us,
            "rf_us": self.rf_us,
            "mw_us": self.mw_us,
            "free_us": self.free_us,
        }


def schedule_timing(schedule: PulseSchedule) -> TimingReport:
    """Exact duration sum with the RF / MW / free-evolution breakdown."""
    by_kind: dict[str, float] = {}
    for e in schedule.elements:
        by_kind[e.kind] = by_kind.get(e.kind, 0.0) + e.duration
    rf = sum(by_kind.get(k, 0.0) for k in RF_KINDS)
    mw = sum(by_kind.get(k, 0.0) for k in MW_KINDS)
    free = by_kind.get(FREE, 0.0)
    return TimingReport(rf + mw + free, rf, mw, free, by_kind)


# ---------------------------------------------------------------------------
# propagators
# ---------------------------------------------------------------------------

def _residual_diagonal(p: NVParams) -> np.ndarray:
    """Diagonal of the kept interaction-frame generator: (Jc/4) sigma_z tau_z."""
    diag = np.zeros(18)
    for si, sz in ((E_UP, 1), (E_DOWN, -1)):
        for ci, tz in ((C_UP, 1), (C_DOWN, -1)):
            for n in (N_ONE, N_ZERO, N_MINUS):
                diag[_full_index(si, ci, n)] = p.delta_eff * sz * tz
    return diag


def _noise_diagonal() -> np.ndarray:
    """Diagonal coupling of a unit quasi-static detuning: (Sz - 1/2) on the electron."""
    diag = np.zeros(18)
    for e, w in ((E_UP, 0.5), (E_DOWN, -0.5), (E_LEAK, -1.5)):
        for c in (C_UP, C_DOWN):
            for n in (N_ONE, N_ZERO, N_MINUS):
                diag[_full_index(e, c, n)] = w
    return diag


def _qubit_rotation(angle: float, phase: float) -> np.ndarray:
    """e^{-i (angle/2)(cos(phase) X + sin(phase) Y)} on a 2-level block."""
    axis = math.cos(phase) * np.array([[0, 1], [1, 0]], dtype=complex) \
        + math.sin(phase) * np.array([[0, -1j], [1j, 0]], dtype=complex)
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return c * np.eye(2, dtype=complex) - 1j * s * axis


def _electron_block_unitary(u2: np.ndarray, mn_levels=(N_ONE, N_ZERO, N_MINUS)) -> np.ndarray:
    """Embed a 2x2 electron-qubit unitary (on mS=+1, mS=0) for the given mN levels."""
    u = np.eye(18, dtype=complex)
    for c in (C_UP, C_DOWN):
        for n in mn_levels:
            i, j = _full_index(E_UP, c, n), _full_index(E_DOWN, c, n)
            u[i, i], u[i, j] = u2[0, 0], u2[0, 1]
            u[j, i], u[j, j] = u2[1, 0], u2[1, 1]
    return u


def _strong_mw_unitary(p: NVParams, angle: float, phase: float, duration: float) -> np.ndarray:
    """Strong resonant pulse with the detuned mS = -1 level included.

    Drive at the mS 0 <-> 1 frequency; in the rotating frame the mS = -1
    level sits at detuning -2 gamma_e B0 and shares the drive matrix
    element, which is where computational leakage comes from.
    """
    if duration <= 0:
        return _electron_block_unitary(_qubit_rotation(angle, phase))
    omega = angle / duration
    det = -2 * p.gamma_e * p.b0
    # 3-level electron block in the order (mS=+1, mS=0, mS=-1)
    h3 = np.zeros((3, 3), dtype=complex)
    drive = 0.5 * omega * np.exp(-1j * phase)
    h3[0, 1] = drive
    h3[1, 0] = np.conj(drive)
    h3[2, 1] = drive
    h3[1, 2] = np.conj(drive)
    h3[2, 2] = -det  # frame energy of the leakage level
    w, v = np.linalg.eigh(h3)
    u3 = (v * np.exp(-1j * w * duration)) @ v.conj().T
    u = np.eye(18, dtype=complex)
    for c in (C_UP, C_DOWN):
        for n in (N_ONE, N_ZERO, N_MINUS):
            rows = [_full_index(e, c, n) for e in (E_UP, E_DOWN, E_LEAK)]
            u[np.ix_(rows, rows)] = u3
    return u


def _nitrogen_rotation_unitary(angle: float, phase: float) -> np.ndarray:
    """Rotation on the 14N {mN=0, mN=+1} qubit; convention |0>_N, |1>_N ordering."""
    u2 = _qubit_rotation(angle, phase)
    u = np.eye(18, dtype=complex)
    for e in (E_UP, E_DOWN, E_LEAK):
        for c in (C_UP, C_DOWN):
            i, j = _full_index(e, c, N_ZERO), _full_index(e, c, N_ONE)
            u[i, i], u[i, j] = u2[0, 0], u2[0, 1]
            u[j, i], u[j, j] = u2[1, 0], u2[1, 1]
    return u


def _carbon_rotation_unitary(angle: float, phase: float) -> np.ndarray:
    u2 = _qubit_rotation(angle, phase)
    u = np.eye(18, dtype=complex)
    for e in (E_UP, E_DOWN, E_LEAK):
        for n in (N_ONE, N_ZERO, N_MINUS):
            i, j = _full_index(e, C_UP, n), _full_index(e, C_DOWN, n)
            u[i, i], u[i, j] = u2[0, 0], u2[0, 1]
            u[j, i], u[j, j] = u2[1, 0], u2[1, 1]
    return u


def _drive_window_unitary(p: NVParams, e: PulseElement, detuning: float,
                          include_leak: bool = True) -> np.ndarray:
    """Raw selective drive window: drive + residual (+ noise) on the target block,
    plain free evolution everywhere else."""
    h = np.diag(_residual_diagonal(p) + detuning * _noise_diagonal()).astype(complex)
    ak = p.gamma_e * e.amplitude / 4
    n = N_ONE if e.target == 1 else N_ZERO
    det_leak = -2 * p.gamma_e * p.b0
    drive = ak * np.exp(-1j * e.phase)
    for c in (C_UP, C_DOWN):
        i, j, l = (_full_index(E_UP, c, n), _full_index(E_DOWN, c, n),
                   _full_index(E_LEAK, c, n))
        h[i, j] += drive
        h[j, i] += np.conj(drive)
        if include_leak and e.amplitude != 0.0:
            h[l, j] += drive
            h[j, l] += np.conj(drive)
            h[l, l] += -det_leak
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * e.duration)) @ v.conj().T


def apply_pulse(e: PulseElement, p: NVParams, tier: str,
                detuning: float = 0.0) -> Operator:
    """Propagator contribution of one element at the given tier.

    Gate tier ignores durations and returns the ideal unitary. Pulse tier
    keeps the ideal-rotation model for calibrated elements but evolves raw
    drive windows and free evolutions exactly, including the quasi-static
    detuning when one is supplied (noisy tier).
    """
    if tier not in TIERS:
        raise ValueError(f"unknown tier {tier!r}")
    noisy = detuning if tier == NOISY else 0.0

    if e.kind == FREE:
        diag = _residual_diagonal(p) + noisy * _noise_diagonal()
        return Operator(NV_SPACE, np.diag(np.exp(-1j * diag * e.duration)))

    if e.kind == FLIP:
        return Operator(NV_SPACE, _electron_block_unitary(_qubit_rotation(math.pi, e.phase)))

    if e.kind == MW:
        if tier == GATE:
            return Operator(NV_SPACE, _electron_block_unitary(_qubit_rotation(e.angle, e.phase)))
        return Operator(NV_SPACE, _strong_mw_unitary(p, e.angle, e.phase, e.duration))

    if e.kind == MW_SELECTIVE:
        if e.angle == 0.0:
            # raw drive window (the H2 slice); zero amplitude degrades to free evolution
            return Operator(NV_SPACE, _drive_window_unitary(
                p, e, noisy, include_leak=(tier != GATE)))
        # calibrated selective rotation: ideal on target, identity off target
        n = N_ONE if e.target == 1 else N_ZERO
        u = _electron_block_unitary(_qubit_rotation(e.angle, e.phase), mn_levels=(n,))
        return Operator(NV_SPACE, u)

    if e.kind == RF_N:
        return Operator(NV_SPACE, _nitrogen_rotation_unitary(e.angle, e.phase))

    if e.kind == RF_C:
        return Operator(NV_SPACE, _carbon_rotation_unitary(e.angle, e.phase))

    raise ValueError(f"unhandled pulse kind {e.kind!r}")


def schedule_propagator(schedule: PulseSchedule, p: NVParams, tier: str | None = None,
                        detuning: float = 0.0) -> Operator:
    """Ordered product of element propagators (first element acts first)."""
    tier = tier or schedule.tier
    u = np.eye(18, dtype=complex)
    for e in schedule.elements:
        u = apply_pulse(e, p, tier, detuning).matrix @ u
    return Operator(NV_SPACE, u)


def refocused_interval(duration: float, flips: str, p: NVParams,
                       tier: str = PULSE, detuning: float = 0.0) -> Operator:
    """Free evolution with optional echo flips at the midpoint and end.

    With flips, every sigma_z-proportional generator (static detuning and
    the Jc/4 sigma_z tau_z hyperfine) cancels exactly over the interval;
    without them they accumulate.
    """
    if flips not in ("none", "midpoint_end"):
        raise ValueError("flips must be 'none' or 'midpoint_end'")
    if flips == "none":
        elems = [PulseElement(FREE, duration)]
    else:
        elems = [
            PulseElement(FREE, duration / 2),
            PulseElement(FLIP, DEFAULT_DURATIONS[FLIP]),
            PulseElement(FREE, duration / 2),
            PulseElement(FLIP, DEFAULT_DURATIONS[FLIP]),
        ]
    return schedule_propagator(PulseSchedule(tuple(elems), PULSE), p, tier, detuning)


# ---------------------------------------------------------------------------
# quasi-static noise Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    """Quasi-static Gaussian dephasing of the electron.

    The detuning is constant within one run and Gaussian across runs with
    sigma = sqrt(2)/T2e*, which reproduces the exp(-(t/T2e*)^2) free
    induction decay. T2e enters only through the optional exponential
    coherence envelope (off by default so refocused intervals recover
    coherence exactly).
    """

    t2_star_e: float = 3.0
    t2_e: float = 200.0
    mc_samples: int = 100
    seed: int = 0
    t2e_envelope: bool = False

    def __post_init__(self):
        if self.t2_star_e > self.t2_e:
            raise ValueError("t2_star_e must be <= t2_e")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")

    @property
    def sigma(self) -> float:
        return math.sqrt(2) / self.t2_star_e


@dataclass(frozen=True)
class NoisyEnsemble:
    """Monte Carlo ensemble of final states, one per detuning sample."""

    states: tuple[StateVector, ...]
    detunings: np.ndarray
    noise: NoiseModel
    wall_time: float

    def expectation(self, op: Operator) -> tuple[float, float]:
        """Ensemble mean and standard error of a Hermitian observable."""
        vals = np.array([np.real(np.vdot(s.amplitudes, op.matrix @ s.amplitudes))
                         for s in self.states])
        n = vals.size
        stderr = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return float(vals.mean()), stderr

    def coherence(self, idx_a: int, idx_b: int) -> tuple[complex, float]:
        """Ensemble-averaged <a|rho|b> matrix element and its standard error."""
        vals = np.array([s.amplitudes[idx_a] * np.conj(s.amplitudes[idx_b])
                         for s in self.states])
        n = vals.size
        stderr = float(np.sqrt(vals.real.var(ddof=1) + vals.imag.var(ddof=1)) /
                       math.sqrt(n)) if n > 1 else 0.0
        mean = complex(vals.mean())
        if self.noise.t2e_envelope:
            mean *= math.exp(-self.wall_time / self.noise.t2_e)
        return mean, stderr


def noisy_run(schedule: PulseSchedule, noise: NoiseModel, initial: StateVector,
              p: NVParams | None = None) -> NoisyEnsemble:
    """Propagate an initial state through the schedule over the detuning ensemble."""
    p = p or NVParams()
    if initial.space != NV_SPACE:
        raise ValueError("initial state must live on the 18-dim register")
    rng = np.random.default_rng(noise.seed)
    deltas = rng.normal(0.0, noise.sigma, size=noise.mc_samples)
    states = []
    for d in deltas:
        u = schedule_propagator(schedule, p, NOISY, detuning=float(d))
        states.append(initial.apply(u))
    return NoisyEnsemble(tuple(states), deltas, noise, schedule.total_duration)


def make_register_state(e_amps, c_amps, n_amps) -> StateVector:
    """Product state from per-spin amplitude lists (dims 3, 2, 3)."""
    e = np.asarray(e_amps, dtype=complex).reshape(3)
    c = np.asarray(c_amps, dtype=complex).reshape(2)
    n = np.asarray(n_amps, dtype=complex).reshape(3)
    full = np.kron(np.kron(e, c), n)
    return StateVector(NV_SPACE, full / np.linalg.norm(full))


def electron_sigma_x() -> Operator:
    """sigma_x on the electron qubit (zero on the mS = -1 level)."""
    m = np.zeros((18, 18), dtype=complex)
    for c in (C_UP, C_DOWN):
        for n in (N_ONE, N_ZERO, N_MINUS):
            i, j = _full_index(E_UP, c, n), _full_index(E_DOWN, c, n)
            m[i, j] = m[j, i] = 1.0
    return Operator(NV_SPACE, m)
