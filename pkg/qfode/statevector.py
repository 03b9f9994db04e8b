"""
Dense statevector simulator.

Bit order: bit j of a basis index is the value of qubit j, least-significant
first. The same convention is used for sub-registers: when a gate acts on
``targets = [t0, t1, ...]``, row/column index bit i of its matrix belongs to
qubit ``targets[i]``, and a register value read from ``qubits = [q0, q1, ...]``
is ``sum(bit(q_i) << i)``.
"""
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from logger import setup_logger
from qfode.errors import ResourceError
from qfode.settings import get_settings

logger = setup_logger(__name__)

UNITARY_ATOL = 1e-10


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2 ** self.num_qubits,):
            raise ValueError(
                f"Expected {2 ** self.num_qubits} amplitudes for {self.num_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())

    def _tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_qubits)


# gates

def hadamard() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def pauli_x() -> np.ndarray:
    return np.array([[0, 1], [1, 0]], dtype=complex)


def ry(angle: float) -> np.ndarray:
    """R_y(angle) = [[cos(a/2), -sin(a/2)], [sin(a/2), cos(a/2)]]."""
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def is_unitary(matrix: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    return bool(np.allclose(matrix.conj().T @ matrix, np.eye(matrix.shape[0]), atol=atol))


# kernels (a trailing batch axis is allowed after the qubit axes)

def _axis(num_qubits: int, qubit: int) -> int:
    return num_qubits - 1 - qubit


def _apply_matrix(tensor: np.ndarray, num_qubits: int, targets: Sequence[int],
                  matrix: np.ndarray) -> np.ndarray:
    k = len(targets)
    axes = [_axis(num_qubits, q) for q in reversed(targets)]
    gate = np.asarray(matrix, dtype=complex).reshape((2,) * (2 * k))
    out = np.tensordot(gate, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def _apply_controlled_matrix(tensor: np.ndarray, num_qubits: int, controls: Sequence[int],
                             targets: Sequence[int], matrix: np.ndarray) -> np.ndarray:
    if not controls:
        return _apply_matrix(tensor, num_qubits, targets, matrix)

    index = [slice(None)] * tensor.ndim
    for c in controls:
        index[_axis(num_qubits, c)] = 1
    index = tuple(index)

    # qubits left after fixing the controls keep their relative order
    remaining = [q for q in range(num_qubits) if q not in controls]
    sub_targets = [remaining.index(t) for t in targets]

    out = tensor.copy()
    out[index] = _apply_matrix(tensor[index], len(remaining), sub_targets, matrix)
    return out


def _check_qubits(state: StateVector, qubits: Sequence[int]):
    for q in qubits:
        if not 0 <= q < state.num_qubits:
            raise ValueError(f"Qubit index {q} out of range for {state.num_qubits} qubits")
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"Qubit indices must be distinct, got {list(qubits)}")


def _check_matrix(matrix: np.ndarray, num_targets: int, validate: bool):
    dim = 2 ** num_targets
    if np.shape(matrix) != (dim, dim):
        raise ValueError(f"Gate must be {dim}x{dim} for {num_targets} target qubit(s), "
                         f"got shape {np.shape(matrix)}")
    if validate and not is_unitary(matrix):
        raise ValueError("Gate matrix is not unitary")


# operations

def new_zero_state(num_qubits: int) -> StateVector:
    cap = get_settings().max_qubits
    if num_qubits < 1:
        raise ValueError(f"Number of qubits must be positive, got {num_qubits}")
    if num_qubits > cap:
        raise ResourceError(f"{num_qubits} qubits exceeds the statevector cap of {cap}")
    amplitudes = np.zeros(2 ** num_qubits, dtype=complex)
    amplitudes[0] = 1.0
    return StateVector(num_qubits, amplitudes)


def apply_single_qubit(state: StateVector, qubit_index: int, gate: np.ndarray,
                       validate: bool = False) -> StateVector:
    _check_qubits(state, [qubit_index])
    _check_matrix(gate, 1, validate)
    out = _apply_matrix(state._tensor(), state.num_qubits, [qubit_index], gate)
    return StateVector(state.num_qubits, out.reshape(-1))


def apply_controlled_unitary(state: StateVector, control_indices: Sequence[int],
                             target_indices: Sequence[int], matrix: np.ndarray,
                             validate: bool = False) -> StateVector:
    """Apply ``matrix`` on the targets where every control qubit is 1."""
    control_indices = list(control_indices)
    target_indices = list(target_indices)
    _check_qubits(state, control_indices + target_indices)
    _check_matrix(matrix, len(target_indices), validate)
    out = _apply_controlled_matrix(state._tensor(), state.num_qubits, control_indices,
                                   target_indices, matrix)
    return StateVector(state.num_qubits, out.reshape(-1))


def apply_controlled(state: StateVector, control_indices: Sequence[int], target_index: int,
                     gate: np.ndarray, validate: bool = False) -> StateVector:
    return apply_controlled_unitary(state, control_indices, [target_index], gate, validate)


def apply_dense_unitary(state: StateVector, target_qubits: Sequence[int], matrix: np.ndarray,
                        validate: bool = False) -> StateVector:
    return apply_controlled_unitary(state, [], target_qubits, matrix, validate)


def dft_matrix(num_qubits: int, inverse: bool = False) -> np.ndarray:
    dim = 2 ** num_qubits
    sign = -1.0 if inverse else 1.0
    x = np.arange(dim)
    return np.exp(sign * 2j * np.pi * np.outer(x, x) / dim) / math.sqrt(dim)


def qft(state: StateVector, register_qubits: Sequence[int]) -> StateVector:
    """|y> -> 2^{-m/2} sum_x exp(+2 pi i y x / 2^m) |x> on the register."""
    if len(register_qubits) < 1:
        raise ValueError("QFT register must contain at least one qubit")
    return apply_dense_unitary(state, register_qubits, dft_matrix(len(register_qubits)))


def inverse_qft(state: StateVector, register_qubits: Sequence[int]) -> StateVector:
    """|y> -> 2^{-m/2} sum_x exp(-2 pi i y x / 2^m) |x> on the register."""
    if len(register_qubits) < 1:
        raise ValueError("QFT register must contain at least one qubit")
    return apply_dense_unitary(state, register_qubits,
                               dft_matrix(len(register_qubits), inverse=True))


def marginal_probability(state: StateVector, qubit_index: int, outcome: int) -> float:
    _check_qubits(state, [qubit_index])
    if outcome not in (0, 1):
        raise ValueError(f"Outcome must be 0 or 1, got {outcome}")
    bits = (np.arange(2 ** state.num_qubits) >> qubit_index) & 1
    return float(state.probabilities()[bits == outcome].sum())


def marginal_distribution(state: StateVector, qubits: Sequence[int]) -> np.ndarray:
    """Probability of each value of the sub-register ``qubits``."""
    qubits = list(qubits)
    _check_qubits(state, qubits)
    n = state.num_qubits
    keep = [_axis(n, q) for q in reversed(qubits)]
    rest = [a for a in range(n) if a not in keep]
    probs = state.probabilities().reshape((2,) * n).transpose(keep + rest)
    return probs.reshape(2 ** len(qubits), -1).sum(axis=1)
