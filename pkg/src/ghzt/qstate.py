"""Dense state-vector kernels: gates, Z measurements, partial traces, fidelity.

Index convention (used by every module in the package): qubit label ``k`` is
bit ``k`` of the amplitude index, so ``|b_{N-1} ... b_1 b_0>`` is stored at
``sum(b_k << k)``. Ket strings produced anywhere in the package list qubits
in ascending label order, i.e. ``ket_string(i, N)[k]`` is the bit of qubit k.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidDensityMatrix,
    NormDriftError,
    QubitIndexError,
    ZeroProbabilityBranch,
)

NORM_TOL = 1e-12
# Drift allowed on entry to a projection before we refuse to renormalize.
DRIFT_TOL = 1e-9
ZERO_BRANCH = 1e-14
# Eigenvalues below this are round-off on a PSD matrix; sqrt(1e-17) would
# otherwise leak ~1e-8 into the fidelity of pure states.
EIG_FLOOR = 1e-14

_SQRT1_2 = 1 / np.sqrt(2)


def ket_string(index: int, num_qubits: int) -> str:
    """Bits of ``index`` listed from qubit 0 upward."""
    return "".join(str((index >> k) & 1) for k in range(num_qubits))


def ket_index(bits: str) -> int:
    """Inverse of :func:`ket_string`."""
    return sum(int(b) << k for k, b in enumerate(bits))


@dataclass(frozen=True)
class Gate:
    name: str
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.shape != (2, 2):
            raise ValueError(f"gate {self.name} must be 2x2, got {mat.shape}")
        if not np.allclose(mat.conj().T @ mat, np.eye(2), atol=1e-12, rtol=0):
            raise ValueError(f"gate {self.name} is not unitary")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def __repr__(self):
        return f"Gate({self.name})"

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash((self.name, self.matrix.tobytes()))


def Unitary2(matrix, name: str = "U") -> Gate:
    return Gate(name, matrix)


I = Gate("I", np.eye(2))
X = Gate("X", [[0, 1], [1, 0]])
Z = Gate("Z", [[1, 0], [0, -1]])
H = Gate("H", np.array([[1, 1], [1, -1]]) * _SQRT1_2)

GATES = {"I": I, "X": X, "Z": Z, "H": H}


class StateVector:
    """Amplitudes of an N-qubit pure state (see module docstring for ordering)."""

    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, num_qubits: int, amplitudes):
        if num_qubits < 1:
            raise ValueError("a state needs at least one qubit")
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        if amps.size != 1 << num_qubits:
            raise ValueError(
                f"expected {1 << num_qubits} amplitudes for {num_qubits} qubits, "
                f"got {amps.size}"
            )
        self.num_qubits = num_qubits
        self.amplitudes = amps

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = int(amps.size).bit_length() - 1
        if amps.size < 2 or 1 << n != amps.size:
            raise ValueError("amplitude count must be a power of two >= 2")
        return cls(n, amps)

    @classmethod
    def basis(cls, num_qubits: int, index: int = 0) -> "StateVector":
        amps = np.zeros(1 << num_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(num_qubits, amps)

    @classmethod
    def from_label(cls, bits: str) -> "StateVector":
        """``from_label("01")`` is q0=0, q1=1."""
        return cls.basis(len(bits), ket_index(bits))

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits})"


def _check_qubit(state: StateVector, qubit: int):
    if not 0 <= qubit < state.num_qubits:
        raise QubitIndexError(
            f"qubit {qubit} out of range for {state.num_qubits}-qubit state"
        )


def _split(amps: np.ndarray, qubit: int) -> np.ndarray:
    # (high, bit, low) view: axis 1 is the bit of `qubit`.
    return amps.reshape(-1, 2, 1 << qubit)


def apply_single(state: StateVector, qubit: int, gate: Gate) -> StateVector:
    _check_qubit(state, qubit)
    view = _split(state.amplitudes, qubit)
    out = np.einsum("ij,ajb->aib", gate.matrix, view)
    return StateVector(state.num_qubits, out.reshape(-1))


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise QubitIndexError("control and target must differ")
    idx = np.arange(state.amplitudes.size)
    flipped = np.where((idx >> control) & 1, idx ^ (1 << target), idx)
    return StateVector(state.num_qubits, state.amplitudes[flipped])


def _branch_probability(state: StateVector, qubit: int, bit: int) -> float:
    view = _split(state.amplitudes, qubit)
    return float(np.sum(np.abs(view[:, bit, :]) ** 2))


def _project(state: StateVector, qubit: int, bit: int, probability: float) -> StateVector:
    norm = state.norm()
    if abs(norm - 1.0) > DRIFT_TOL:
        raise NormDriftError(f"state norm drifted to {norm!r} before projection")
    view = _split(state.amplitudes, qubit).copy()
    view[:, 1 - bit, :] = 0
    return StateVector(state.num_qubits, view.reshape(-1) / np.sqrt(probability))


def project_z(state: StateVector, qubit: int, bit: int) -> tuple[float, StateVector]:
    """Project ``qubit`` onto ``|bit>``; returns (branch probability, renormalized state)."""
    _check_qubit(state, qubit)
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    p = _branch_probability(state, qubit, bit)
    if p < ZERO_BRANCH:
        raise ZeroProbabilityBranch(qubit, bit, p)
    return p, _project(state, qubit, bit, p)


def measure_z(state: StateVector, qubit: int, rng: np.random.Generator) -> tuple[int, StateVector]:
    _check_qubit(state, qubit)
    p1 = _branch_probability(state, qubit, 1)
    p0 = 1.0 - p1
    # always consume one draw so the rng stream does not depend on the branch
    u = rng.random()
    if p1 < ZERO_BRANCH:
        bit = 0
    elif p0 < ZERO_BRANCH:
        bit = 1
    else:
        bit = int(u < p1)
    p = p1 if bit else _branch_probability(state, qubit, 0)
    return bit, _project(state, qubit, bit, p)


class DensityMatrix:
    __slots__ = ("num_qubits", "matrix")

    def __init__(self, matrix, validate: bool = True):
        mat = np.array(matrix, dtype=complex)
        dim = mat.shape[0]
        k = int(dim).bit_length() - 1
        if mat.ndim != 2 or mat.shape[1] != dim or dim < 2 or 1 << k != dim:
            raise InvalidDensityMatrix(f"bad density-matrix shape {mat.shape}")
        self.num_qubits = k
        self.matrix = mat
        if validate:
            self.validate()

    @classmethod
    def from_state(cls, state) -> "DensityMatrix":
        amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
        return cls(np.outer(amps, amps.conj()))

    def validate(self):
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=1e-12, rtol=0):
            raise InvalidDensityMatrix("matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1) > 1e-12:
            raise InvalidDensityMatrix(f"trace is {tr!r}, expected 1")
        if np.linalg.eigvalsh(m).min() < -1e-10:
            raise InvalidDensityMatrix("matrix has a negative eigenvalue")

    def __repr__(self):
        return f"DensityMatrix(num_qubits={self.num_qubits})"


def reduced_density(state: StateVector, keep: Sequence[int]) -> DensityMatrix:
    """Partial trace onto ``keep``; bit ``k`` of the result's index is qubit ``keep[k]``."""
    keep = list(keep)
    if not keep:
        raise ValueError("keep must be non-empty")
    if len(set(keep)) != len(keep):
        raise QubitIndexError(f"duplicate qubits in {keep}")
    for q in keep:
        _check_qubit(state, q)
    n = state.num_qubits
    # tensor axis a holds qubit n-1-a
    psi = state.amplitudes.reshape((2,) * n)
    front = [n - 1 - q for q in reversed(keep)]
    rest = [a for a in range(n) if a not in front]
    mat = np.transpose(psi, front + rest).reshape(1 << len(keep), -1)
    rho = mat @ mat.conj().T
    # exact hermiticity; the product is hermitian only up to rounding
    rho = (rho + rho.conj().T) / 2
    return DensityMatrix(rho)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2)
    w = np.sqrt(np.where(w < EIG_FLOOR, 0.0, w))
    return (v * w) @ v.conj().T


def fidelity(rho_in: DensityMatrix, rho_out: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))**2."""
    if rho_in.matrix.shape != rho_out.matrix.shape:
        raise DimensionMismatch(
            f"{rho_in.matrix.shape} vs {rho_out.matrix.shape}"
        )
    s = _psd_sqrt(rho_in.matrix)
    inner = s @ rho_out.matrix @ s
    w = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    return float(np.sum(np.sqrt(np.where(w < EIG_FLOOR, 0.0, w))) ** 2)


def pure_fidelity(psi_in: StateVector, psi_out: StateVector) -> float:
    if psi_in.num_qubits != psi_out.num_qubits:
        raise DimensionMismatch(
            f"{psi_in.num_qubits} vs {psi_out.num_qubits} qubits"
        )
    return float(abs(np.vdot(psi_in.amplitudes, psi_out.amplitudes)) ** 2)
