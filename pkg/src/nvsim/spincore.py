"""Dense complex spin algebra: tensor spaces, operators, propagators, measurement.

Conventions used throughout the package:
  - Hamiltonian matrix entries are angular frequencies in rad/us; every
    constant quoted as "X/2pi = ..." is multiplied by 2pi on ingestion.
  - Durations are in us.
  - Propagators are e^{-iHt}, computed by Hermitian eigendecomposition
    (exact at these dimensions, <= 18).
  - Unitaries are compared up to global phase with the phase-aligned
    Frobenius distance min_theta ||U - e^{i theta} V||.

All values are immutable after construction and all operations are pure
functions, so everything here is safe to share across parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

# Single source of truth for the numerical contracts.
HERMITICITY_TOL = 1e-12   # max-abs deviation of H from H^dagger
UNITARITY_TOL = 1e-9      # max-abs deviation of U^dagger U from identity
NORM_TOL = 1e-10          # state 2-norm and probability-sum tolerance

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


class DimensionError(ValueError):
    """Operator/state dimensions do not match the declared space."""


class ContractError(RuntimeError):
    """A numerical contract (hermiticity, unitarity, normalization) failed."""


@dataclass(frozen=True)
class HilbertSpace:
    """An ordered tensor product of finite-dimensional factors."""

    factor_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"factor dims must be positive, got {dims}")
        object.__setattr__(self, "factor_dims", dims)

    @property
    def dim(self) -> int:
        return prod(self.factor_dims)

    @property
    def n_factors(self) -> int:
        return len(self.factor_dims)


@dataclass(frozen=True)
class Operator:
    """A dense complex square matrix living on a HilbertSpace."""

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"operator matrix must be square, got {m.shape}")
        if m.shape[0] != self.space.dim:
            raise DimensionError(
                f"matrix dim {m.shape[0]} does not match space dim {self.space.dim}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.space.dim

    def dagger(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.space != other.space:
            raise DimensionError("operator spaces differ")
        return Operator(self.space, self.matrix @ other.matrix)

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return bool(np.abs(self.matrix - self.matrix.conj().T).max() <= tol)

    def is_unitary(self, tol: float = UNITARITY_TOL) -> bool:
        d = self.matrix.conj().T @ self.matrix - np.eye(self.dim)
        return bool(np.abs(d).max() <= tol)


@dataclass(frozen=True)
class StateVector:
    """A normalized ket on a HilbertSpace."""

    space: HilbertSpace
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if a.size != self.space.dim:
            raise DimensionError(
                f"amplitude dim {a.size} does not match space dim {self.space.dim}")
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > NORM_TOL:
            raise ContractError(f"state norm {norm} deviates from 1 beyond {NORM_TOL}")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def dim(self) -> int:
        return self.space.dim

    def apply(self, op: Operator) -> "StateVector":
        if op.space != self.space:
            raise DimensionError("operator space differs from state space")
        out = op.matrix @ self.amplitudes
        # renormalize away float drift only; a real norm change is a bug upstream
        return StateVector(self.space, out / np.linalg.norm(out))


def normalized(space: HilbertSpace, amplitudes) -> StateVector:
    """Build a StateVector from unnormalized amplitudes."""
    a = np.asarray(amplitudes, dtype=complex).reshape(-1)
    n = np.linalg.norm(a)
    if n == 0:
        raise ValueError("cannot normalize the zero vector")
    return StateVector(space, a / n)


def embed(op: Operator, slot: int, space: HilbertSpace) -> Operator:
    """Embed a single-factor operator as id (x) ... (x) op (x) ... (x) id."""
    if not 0 <= slot < space.n_factors:
        raise DimensionError(f"slot {slot} out of range for {space.n_factors} factors")
    if op.dim != space.factor_dims[slot]:
        raise DimensionError(
            f"operator dim {op.dim} does not match factor dim "
            f"{space.factor_dims[slot]} at slot {slot}")
    out = np.eye(1, dtype=complex)
    for i, d in enumerate(space.factor_dims):
        out = np.kron(out, op.matrix if i == slot else np.eye(d, dtype=complex))
    return Operator(space, out)


def kron_all(space: HilbertSpace, factors) -> Operator:
    """Kronecker product of one matrix per factor (None means identity)."""
    if len(factors) != space.n_factors:
        raise DimensionError("need one factor matrix per tensor factor")
    out = np.eye(1, dtype=complex)
    for d, f in zip(space.factor_dims, factors):
        m = np.eye(d, dtype=complex) if f is None else np.asarray(f, dtype=complex)
        if m.shape != (d, d):
            raise DimensionError(f"factor shape {m.shape} does not match dim {d}")
        out = np.kron(out, m)
    return Operator(space, out)


def propagator(h: Operator, t: float) -> Operator:
    """e^{-i h t} for Hermitian h via eigendecomposition."""
    if t < 0:
        raise ValueError(f"propagation time must be >= 0, got {t}")
    if not h.is_hermitian():
        dev = np.abs(h.matrix - h.matrix.conj().T).max()
        raise ContractError(f"non-Hermitian generator (max dev {dev:.3e})")
    w, v = np.linalg.eigh(h.matrix)
    u = (v * np.exp(-1j * w * t)) @ v.conj().T
    out = Operator(h.space, u)
    if not out.is_unitary():
        raise ContractError("propagator failed the unitarity contract")
    return out


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2, invariant under global phase of either state."""
    if a.space != b.space:
        raise DimensionError("states live on different spaces")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def _check_orthonormal(basis: np.ndarray, tol: float = NORM_TOL):
    g = basis.conj().T @ basis
    if np.abs(g - np.eye(g.shape[0])).max() > tol:
        raise ContractError("measurement basis is not orthonormal within tolerance")


def measure_subsystem(psi: StateVector, slot: int, basis) -> np.ndarray:
    """Born-rule probabilities for measuring one factor in the given basis.

    `basis` is a sequence of orthonormal kets spanning that factor (it may
    also be a partial orthonormal set; probabilities then sum to <= 1).
    Does not mutate psi; use collapse_subsystem for the post-measurement state.
    """
    dims = psi.space.factor_dims
    if not 0 <= slot < len(dims):
        raise DimensionError(f"slot {slot} out of range")
    b = np.asarray(basis, dtype=complex)
    if b.ndim != 2 or b.shape[1] != dims[slot]:
        raise DimensionError(
            f"basis vectors must have dim {dims[slot]}, got shape {b.shape}")
    _check_orthonormal(b.T)
    tensor = psi.amplitudes.reshape(dims)
    tensor = np.moveaxis(tensor, slot, 0)
    # amplitude of basis state k: <b_k| contracted on the measured factor
    amps = np.tensordot(b.conj(), tensor, axes=([1], [0]))
    probs = np.sum(np.abs(amps) ** 2, axis=tuple(range(1, amps.ndim)))
    if b.shape[0] == dims[slot] and abs(probs.sum() - 1.0) > NORM_TOL:
        raise ContractError(f"probabilities sum to {probs.sum()}, not 1")
    return probs


def collapse_subsystem(psi: StateVector, slot: int, basis, outcome: int) -> StateVector:
    """Post-measurement state after observing `outcome` in `basis` on `slot`."""
    dims = psi.space.factor_dims
    b = np.asarray(basis, dtype=complex)
    _check_orthonormal(b.T)
    tensor = psi.amplitudes.reshape(dims)
    tensor = np.moveaxis(tensor, slot, 0)
    amp = np.tensordot(b[outcome].conj(), tensor, axes=([0], [0]))
    # rebuild the full ket with the measured factor pinned to b[outcome]
    out = np.multiply.outer(b[outcome], amp)
    out = np.moveaxis(out, 0, slot).reshape(-1)
    norm = np.linalg.norm(out)
    if norm < 1e-15:
        raise ValueError(f"outcome {outcome} has zero probability")
    return StateVector(psi.space, out / norm)


def phase_aligned_distance(u, v) -> float:
    """min over theta of ||U - e^{i theta} V||_F (global-phase-blind distance)."""
    mu = u.matrix if isinstance(u, Operator) else np.asarray(u)
    mv = v.matrix if isinstance(v, Operator) else np.asarray(v)
    tr = np.trace(mv.conj().T @ mu)
    phase = tr / abs(tr) if abs(tr) > 1e-300 else 1.0
    return float(np.linalg.norm(mu - phase * mv))
