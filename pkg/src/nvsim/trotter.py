"""Compiling the film evolution onto the register.

The film Hamiltonian is mapped onto the drive-plus-hyperfine Hamiltonian by
the local transformation U1 = e^{i pi/4 tz sz} e^{i pi/4 tx}:

    Hs = U1^{-1} H_TI U1 = A ky sy + A kx sx + delta tz sz + eps_b ty sy

and e^{-i Hs t} is split first order as (e^{-i H1 t/n} e^{-i H2 t/n})^n with
H1 = eps_b ty sy and H2 = A ky sy + A kx sx + delta tz sz. H2 is the
rotating-frame Hamiltonian of a resonant microwave drive (A kx = ge B1
cos(phi)/4, A ky = ge B1 sin(phi)/4, delta = Jc/4), and each H1 slice is a
U2-conjugated free evolution, U2 e^{-i delta tz sz s t/n} U2^{-1} with
U2 = e^{i pi/4 tx} e^{i pi/4 sx}. Sweeping eps_b = s*delta costs nothing
but rescaling the H1 slice durations to t' = s t.

The 14N-controlled version applies the whole construction in the |1>_N
subspace: selective drive windows realize the H2 slices there, selective
electron pi pulses refocus the hyperfine in the |0>_N subspace (one per
slice boundary; [sy ty, sz sz-type generators] commute, so equal slices
cancel pairwise), and the U1/U2 pairs act in all subspaces but compose to
the identity where the drive never fired.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .spincore import (
    Operator,
    StateVector,
    ContractError,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    ID2,
    HilbertSpace,
    phase_aligned_distance,
    propagator,
)
from .timodel import TIParams, Momentum, SIGMA_TAU_SPACE, build_h_ti
from . import nvmachine as nv
from .nvmachine import NVParams, PulseElement, PulseSchedule

CONTROLLED_SPACE = HilbertSpace((2, 2, 2))  # sigma (x) tau (x) N-qubit

GATE_SUBSPACE_TOL = 1e-9
PULSE_SUBSPACE_TOL = 5e-2
CONJUGATION_TOL = 1e-12


def _exp_pauli(g: np.ndarray, theta: float) -> np.ndarray:
    """e^{i theta G} for an involutory G (G^2 = 1)."""
    return math.cos(theta) * np.eye(g.shape[0], dtype=complex) + 1j * math.sin(theta) * g


def u1_operator() -> Operator:
    """U1 = e^{i pi/4 sz tz} e^{i pi/4 tx}."""
    m = _exp_pauli(np.kron(PAULI_Z, PAULI_Z), math.pi / 4) @ \
        _exp_pauli(np.kron(ID2, PAULI_X), math.pi / 4)
    return Operator(SIGMA_TAU_SPACE, m)


def u2_operator() -> Operator:
    """U2 = e^{i pi/4 tx} e^{i pi/4 sx}."""
    m = _exp_pauli(np.kron(ID2, PAULI_X), math.pi / 4) @ \
        _exp_pauli(np.kron(PAULI_X, ID2), math.pi / 4)
    return Operator(SIGMA_TAU_SPACE, m)


def h1_matrix(p: TIParams) -> np.ndarray:
    return p.eps_b * np.kron(PAULI_Y, PAULI_Y)


def h2_matrix(p: TIParams, k: Momentum) -> np.ndarray:
    return (p.A * k.ky * np.kron(PAULI_Y, ID2)
            + p.A * k.kx * np.kron(PAULI_X, ID2)
            + p.delta * np.kron(PAULI_Z, PAULI_Z))


def build_hs(p: TIParams, k: Momentum) -> tuple[Operator, Operator]:
    """The register Hamiltonian Hs and the mapping U1, with the conjugation self-check."""
    hs = Operator(SIGMA_TAU_SPACE, h1_matrix(p) + h2_matrix(p, k))
    u1 = u1_operator()
    h_ti = build_h_ti(p, k)
    dev = np.abs(u1.matrix.conj().T @ h_ti.matrix @ u1.matrix - hs.matrix).max()
    if dev > CONJUGATION_TOL:
        raise ContractError(
            f"U1 conjugation identity violated (max dev {dev:.3e}); "
            f"this indicates a sign-convention bug")
    return hs, u1


def exact_hs_unitary(p: TIParams, k: Momentum, t: float) -> Operator:
    """Reference e^{-i Hs t} from the exact exponential."""
    hs, _ = build_hs(p, k)
    return propagator(hs, t)


def drive_mapping(a: float, kx: float, ky: float, gamma_e: float) -> tuple[float, float]:
    """Momentum -> microwave drive: B1 = 4 A |k| / gamma_e, phi = atan2(ky, kx)."""
    kmag = math.hypot(kx, ky)
    if kmag == 0.0:
        return 0.0, 0.0
    return 4 * a * kmag / gamma_e, math.atan2(ky, kx)


def inverse_drive_mapping(a: float, b1: float, phi: float, gamma_e: float) -> tuple[float, float]:
    ak = gamma_e * b1 / 4
    return ak * math.cos(phi) / a, ak * math.sin(phi) / a


@dataclass(frozen=True)
class TrotterPlan:
    """One compiled run: simulated time t, slice count n, field ratio s, drive."""

    t: float
    n: int
    s: float
    b1: float
    phi: float
    tier: str = nv.GATE

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("slice count n must be >= 1")
        if self.t < 0:
            raise ValueError("simulated time t must be >= 0")
        if self.s < 0:
            raise ValueError("field ratio s must be >= 0")
        if self.tier not in nv.TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")

    @classmethod
    def for_momentum(cls, p: TIParams, k: Momentum, t: float, n: int,
                     tier: str = nv.GATE,
                     gamma_e: float = NVParams().gamma_e) -> "TrotterPlan":
        b1, phi = drive_mapping(p.A, k.kx, k.ky, gamma_e)
        return cls(t=t, n=n, s=p.eps_b / p.delta, b1=b1, phi=phi, tier=tier)

    def check_consistent(self, p: TIParams, k: Momentum,
                         gamma_e: float = NVParams().gamma_e):
        b1, phi = drive_mapping(p.A, k.kx, k.ky, gamma_e)
        scale = max(abs(self.b1), abs(b1), 1e-30)
        if abs(self.b1 - b1) > 1e-9 * scale or (self.b1 != 0 and
                                                abs(self.phi - phi) > 1e-9):
            raise ValueError("plan drive is inconsistent with the requested momentum")
        if abs(self.s - p.eps_b / p.delta) > 1e-9 * max(self.s, 1.0):
            raise ValueError("plan field ratio s is inconsistent with eps_b/delta")


def trotter_unitary(plan: TrotterPlan, p: TIParams, k: Momentum) -> Operator:
    """First-order product (e^{-i H1 t'/n} e^{-i H2 t/n})^n on sigma (x) tau.

    The H1 factor is built the way the register realizes it: a U2-conjugated
    tz sz free evolution with slice duration s*t/n.
    """
    plan.check_consistent(p, k)
    u2 = u2_operator().matrix
    zz = np.kron(PAULI_Z, PAULI_Z)
    theta = p.delta * plan.s * plan.t / plan.n   # = eps_b * t / n
    u_h1 = u2 @ _exp_pauli(zz, -theta) @ u2.conj().T
    u_h2 = propagator(Operator(SIGMA_TAU_SPACE, h2_matrix(p, k)), plan.t / plan.n).matrix
    step = u_h1 @ u_h2
    out = np.eye(4, dtype=complex)
    for _ in range(plan.n):
        out = step @ out
    return Operator(SIGMA_TAU_SPACE, out)


# ---------------------------------------------------------------------------
# controlled-U compilation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GateSpec:
    name: str
    subspace: str  # "all", "n0", or "n1"
    params: dict

    def to_json_dict(self) -> dict:
        return {"name": self.name, "params": self.params, "subspace": self.subspace}


@dataclass(frozen=True)
class CompiledCircuit:
    """A compiled 14N-controlled film evolution.

    Gate tier carries the 8-dim unitary on sigma (x) tau (x) N-qubit whose
    |1>_N block approximates e^{-i H_TI t} and whose |0>_N block is the
    identity up to a global phase. Pulse tier carries the PulseSchedule
    realizing the same circuit on the physical register.
    """

    plan: TrotterPlan
    tier: str
    gates: tuple[GateSpec, ...]
    unitary: Operator | None = None
    schedule: PulseSchedule | None = None
    block0_deviation: float = 0.0

    def gate_list_json(self) -> str:
        return json.dumps([g.to_json_dict() for g in self.gates], indent=2)


def controlled_block_unitary(u_block: np.ndarray) -> Operator:
    """diag blocks: identity on |0>_N, u_block on |1>_N (N index is fastest)."""
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    m = np.kron(np.eye(4, dtype=complex), p0) + np.kron(u_block, p1)
    return Operator(CONTROLLED_SPACE, m)


def block0_identity_deviation(u: Operator) -> float:
    """Max-abs deviation of the |0>_N block from e^{i alpha} I."""
    m = u.matrix
    idx0 = [0, 2, 4, 6]
    idx1 = [1, 3, 5, 7]
    block0 = m[np.ix_(idx0, idx0)]
    off = np.abs(m[np.ix_(idx0, idx1)]).max(initial=0.0)
    off = max(off, np.abs(m[np.ix_(idx1, idx0)]).max(initial=0.0))
    tr = np.trace(block0)
    phase = tr / abs(tr) if abs(tr) > 1e-300 else 1.0
    dev = np.abs(block0 - phase * np.eye(4)).max()
    return float(max(dev, off))


def _rotation_duration(kind: str, angle: float, p: NVParams) -> float:
    if kind == nv.MW:
        return nv.DEFAULT_DURATIONS[nv.MW]
    if kind == nv.RF_C:
        return nv.DEFAULT_DURATIONS[nv.RF_C]
    if kind == nv.RF_N:
        return nv.DEFAULT_DURATIONS[nv.RF_N]
    raise ValueError(kind)


def _selective_pi_duration(p: NVParams) -> float:
    # square-pulse timing that makes the Jn-detuned block close exactly:
    # Omega*T = pi on resonance and sqrt(Omega^2 + Jn^2)*T = 2 pi off it
    return math.pi * math.sqrt(3) / p.j_n


def _zz_free_duration(theta: float, p: NVParams) -> float:
    """Free-evolution time realizing e^{i theta sz tz} up to global phase.

    e^{-i delta T sz tz} equals e^{i theta sz tz} (global phase allowed)
    when delta*T = -theta mod pi with a parity constraint; the minimal
    solutions are delta*T = (-theta) mod 2pi or ((pi - theta) mod 2pi)
    whichever is smaller.
    """
    d = p.delta_eff
    candidates = [(-theta) % (2 * math.pi), (math.pi - theta) % (2 * math.pi)]
    return min(c for c in candidates) / d


def compile_controlled_u(plan: TrotterPlan, p: TIParams, k: Momentum,
                         nv_params: NVParams | None = None) -> CompiledCircuit:
    """Compile the ancilla-controlled film evolution at the plan's tier."""
    nvp = nv_params or NVParams()
    plan.check_consistent(p, k, gamma_e=nvp.gamma_e)
    if abs(p.delta - nvp.delta_eff) > 1e-9 * p.delta:
        raise ValueError(
            f"the register fixes delta = Jc/4 = {nvp.delta_eff:.6g} rad/us; "
            f"got delta = {p.delta:.6g}")

    gates, elements = _controlled_u_sequence(plan, p, k, nvp)

    if plan.tier == nv.GATE:
        u1 = u1_operator().matrix
        u_block = u1 @ trotter_unitary(plan, p, k).matrix @ u1.conj().T
        u = controlled_block_unitary(u_block)
        dev = block0_identity_deviation(u)
        if dev > GATE_SUBSPACE_TOL:
            raise ContractError(f"|0>_N block deviates from identity by {dev:.3e}")
        return CompiledCircuit(plan, plan.tier, tuple(gates), unitary=u,
                               block0_deviation=dev)

    schedule = PulseSchedule(tuple(elements), tier=plan.tier)
    u18 = nv.schedule_propagator(schedule, nvp, tier=nv.PULSE)
    emb = nv.qubit_embedding(nvp)
    u8 = emb.restrict_unitary(u18)
    dev = block0_identity_deviation(Operator(CONTROLLED_SPACE, _reorder_comp(u8)))
    if dev > PULSE_SUBSPACE_TOL:
        raise ContractError(f"|0>_N block deviates from identity by {dev:.3e}")
    return CompiledCircuit(plan, plan.tier, tuple(gates), schedule=schedule,
                           block0_deviation=dev)


def _reorder_comp(u8: np.ndarray) -> np.ndarray:
    # QubitEmbedding already orders the computational basis as 4*s+2*t+n
    return u8


def compiled_unitary_8(circuit: CompiledCircuit, nvp: NVParams | None = None) -> np.ndarray:
    """The 8-dim computational-subspace unitary of a compiled circuit."""
    if circuit.unitary is not None:
        return circuit.unitary.matrix
    nvp = nvp or NVParams()
    u18 = nv.schedule_propagator(circuit.schedule, nvp, tier=nv.PULSE)
    return nv.qubit_embedding(nvp).restrict_unitary(u18)


def compiled_leakage(circuit: CompiledCircuit, nvp: NVParams | None = None) -> float:
    """Worst-case computational-subspace population loss (0 at gate tier)."""
    if circuit.unitary is not None:
        return 0.0
    nvp = nvp or NVParams()
    u18 = nv.schedule_propagator(circuit.schedule, nvp, tier=nv.PULSE)
    return nv.qubit_embedding(nvp).unitary_leakage(u18)


def _controlled_u_sequence(plan: TrotterPlan, p: TIParams, k: Momentum,
                           nvp: NVParams):
    """Gate list and pulse elements for U1 (trotter slices) U1^dagger, controlled."""
    gates: list[GateSpec] = []
    elements: list[PulseElement] = []
    t_slice = plan.t / plan.n
    t_h1 = plan.s * plan.t / plan.n
    sel_pi = _selective_pi_duration(nvp)
    flip_count = 0

    def emit(name, subspace, params, element=None):
        gates.append(GateSpec(name, subspace, params))
        if element is not None:
            elements.append(element)

    def emit_refocus():
        # phase-alternated pi flips: (-i sx)(+i sx) = 1, so a flip pair leaves
        # no spurious phase on the |0>_N block relative to |1>_N
        nonlocal flip_count
        phase = 0.0 if flip_count % 2 == 0 else math.pi
        flip_count += 1
        emit("refocus_pi", "n0", {"angle": math.pi, "phase": phase},
             PulseElement(nv.MW_SELECTIVE, sel_pi, angle=math.pi, phase=phase,
                          target=0, label="refocus"))

    # U1^{-1} = e^{-i pi/4 tx} e^{-i pi/4 sz tz}, rightmost factor first
    emit("zz_free", "all", {"theta": -math.pi / 4},
         PulseElement(nv.FREE, _zz_free_duration(-math.pi / 4, nvp), label="u1_dag_zz"))
    emit("c_rotation", "all", {"angle": math.pi / 2, "phase": 0.0},
         PulseElement(nv.RF_C, nv.DEFAULT_DURATIONS[nv.RF_C], angle=math.pi / 2,
                      label="u1_dag_tx"))

    odd = plan.n % 2 == 1
    for i in range(plan.n):
        last = i == plan.n - 1
        split_windows = odd and last
        # H2 slice: selective drive window in |1>_N
        if split_windows and t_slice > 0:
            for half in range(2):
                emit("h2_drive", "n1",
                     {"duration": t_slice / 2, "b1": plan.b1, "phi": plan.phi},
                     PulseElement(nv.MW_SELECTIVE, t_slice / 2, amplitude=plan.b1,
                                  phase=plan.phi, target=1, label=f"h2_slice{i}"))
                emit_refocus()
        else:
            emit("h2_drive", "n1",
                 {"duration": t_slice, "b1": plan.b1, "phi": plan.phi},
                 PulseElement(nv.MW_SELECTIVE, t_slice, amplitude=plan.b1,
                              phase=plan.phi, target=1, label=f"h2_slice{i}"))
        # H1 slice: U2 e^{-i delta tz sz s t/n} U2^{-1}
        emit("c_rotation", "all", {"angle": math.pi / 2, "phase": 0.0},
             PulseElement(nv.RF_C, nv.DEFAULT_DURATIONS[nv.RF_C], angle=math.pi / 2,
                          label="u2_dag_tx"))
        emit("e_rotation", "all", {"angle": math.pi / 2, "phase": 0.0},
             PulseElement(nv.MW, nv.DEFAULT_DURATIONS[nv.MW], angle=math.pi / 2,
                          label="u2_dag_sx"))
        if split_windows and t_h1 > 0:
            for half in range(2):
                emit("h1_free", "n1", {"duration": t_h1 / 2},
                     PulseElement(nv.FREE, t_h1 / 2, label=f"h1_slice{i}"))
                emit_refocus()
        else:
            emit("h1_free", "n1", {"duration": t_h1},
                 PulseElement(nv.FREE, t_h1, label=f"h1_slice{i}"))
        emit("e_rotation", "all", {"angle": -math.pi / 2, "phase": 0.0},
             PulseElement(nv.MW, nv.DEFAULT_DURATIONS[nv.MW], angle=-math.pi / 2,
                          label="u2_sx"))
        emit("c_rotation", "all", {"angle": -math.pi / 2, "phase": 0.0},
             PulseElement(nv.RF_C, nv.DEFAULT_DURATIONS[nv.RF_C], angle=-math.pi / 2,
                          label="u2_tx"))
        # slice-boundary refocus flip in |0>_N (even slice count cancels pairwise)
        if not split_windows:
            emit_refocus()

    # U1 = e^{i pi/4 sz tz} e^{i pi/4 tx}, rightmost factor first
    emit("c_rotation", "all", {"angle": -math.pi / 2, "phase": 0.0},
         PulseElement(nv.RF_C, nv.DEFAULT_DURATIONS[nv.RF_C], angle=-math.pi / 2,
                      label="u1_tx"))
    emit("zz_free", "all", {"theta": math.pi / 4},
         PulseElement(nv.FREE, _zz_free_duration(math.pi / 4, nvp), label="u1_zz"))
    return gates, elements


# ---------------------------------------------------------------------------
# Trotter fidelity sweep
# ---------------------------------------------------------------------------

DEFAULT_S_VALUES = (0.57, 1.0, 1.43)
DEFAULT_PHI_VALUES = (0.0, math.pi / 6, math.pi / 3, math.pi / 2)
DEFAULT_FIDELITY_POINTS = 12
SCALING_N_VALUES = (2, 4, 8, 16, 32)


def fidelity_t_max(delta: float) -> float:
    """Default sweep horizon: one n = 2 step stays in its useful regime."""
    return math.pi / (4 * delta)


def scaling_t(delta: float) -> float:
    """Fixed time for the error-vs-n fit, well inside the 1/n regime."""
    return 0.2 * 2 * math.pi / delta


@dataclass(frozen=True)
class FidelityReport:
    """Trotter quality over the default momentum/field sweep.

    min/mean fidelity is the state fidelity of the n-slice product against
    the exact evolution over the sweep's eigenstate inputs and t-grid; the
    scaling entries are phase-aligned unitary distances at a fixed time,
    whose log-log slope against n is the first-order error exponent.
    """

    n_values: tuple[int, ...]
    min_fidelity: dict
    mean_fidelity: dict
    scaling_distance: dict
    scaling_exponent: float
    grid: dict

    def to_json_dict(self) -> dict:
        return {
            "n_values": list(self.n_values),
            "min_fidelity": {str(n): v for n, v in self.min_fidelity.items()},
            "mean_fidelity": {str(n): v for n, v in self.mean_fidelity.items()},
            "scaling_distance": {str(n): v for n, v in self.scaling_distance.items()},
            "scaling_exponent": self.scaling_exponent,
            "grid": self.grid,
        }


def fidelity_sweep(n_values=(2,), nvp: NVParams | None = None,
                   s_values=DEFAULT_S_VALUES, k_mag: float = 1.0,
                   phi_values=DEFAULT_PHI_VALUES,
                   t_points: int = DEFAULT_FIDELITY_POINTS,
                   scaling_n_values=SCALING_N_VALUES) -> FidelityReport:
    """Minimum/mean state fidelity of the n-slice product vs the exact flow.

    The sweep covers the register's working regime: delta = Jc/4, momenta
    on the |k| = k_mag * delta/A circle at the given drive phases, the
    field ratios of the phase-transition scan, all four eigenstate inputs,
    and a t-grid up to pi/(4 delta).
    """
    nvp = nvp or NVParams()
    delta = nvp.delta_eff
    a = delta
    t_grid = np.linspace(0.0, fidelity_t_max(delta), t_points + 1)[1:]
    n_values = tuple(int(n) for n in n_values)
    fids: dict[int, list] = {n: [] for n in n_values}
    for s in s_values:
        p = TIParams(a, delta, s * delta)
        for phi in phi_values:
            k = Momentum(k_mag * math.cos(phi) * delta / a,
                         k_mag * math.sin(phi) * delta / a)
            hs, _ = build_hs(p, k)
            w, v = np.linalg.eigh(hs.matrix)
            for t in t_grid:
                u_exact = (v * np.exp(-1j * w * t)) @ v.conj().T
                for n in n_values:
                    plan = TrotterPlan.for_momentum(p, k, float(t), n,
                                                    gamma_e=nvp.gamma_e)
                    u_tr = trotter_unitary(plan, p, k).matrix
                    for m in range(4):
                        psi = v[:, m]
                        f = abs(np.vdot(u_exact @ psi, u_tr @ psi)) ** 2
                        fids[n].append(f)

    # error-vs-n scaling at fixed t over the kx != 0 sweep points
    t_fit = scaling_t(delta)
    dists = {n: [] for n in scaling_n_values}
    for s in s_values:
        p = TIParams(a, delta, s * delta)
        for phi in phi_values:
            if abs(math.cos(phi)) < 1e-12:
                continue  # kx = 0 commutes exactly; no error to fit
            k = Momentum(k_mag * math.cos(phi) * delta / a,
                         k_mag * math.sin(phi) * delta / a)
            u_exact = exact_hs_unitary(p, k, t_fit).matrix
            for n in scaling_n_values:
                plan = TrotterPlan.for_momentum(p, k, t_fit, n,
                                                gamma_e=nvp.gamma_e)
                dists[n].append(phase_aligned_distance(
                    trotter_unitary(plan, p, k).matrix, u_exact))
    mean_dist = {n: float(np.mean(d)) for n, d in dists.items()}
    ns = np.array(sorted(mean_dist))
    slope = float(np.polyfit(np.log(ns), np.log([mean_dist[n] for n in ns]), 1)[0])
    return FidelityReport(
        n_values=n_values,
        min_fidelity={n: float(np.min(f)) for n, f in fids.items()},
        mean_fidelity={n: float(np.mean(f)) for n, f in fids.items()},
        scaling_distance=mean_dist,
        scaling_exponent=-slope,
        grid={
            "s_values": list(s_values),
            "k_mag": k_mag,
            "phi_values": [float(x) for x in phi_values],
            "t_max_us": fidelity_t_max(delta),
            "t_points": t_points,
            "scaling_t_us": t_fit,
        },
    )
