"""
Oracles, the Grover-like operator Q and amplitude estimation for integrals.

Register layout of an oracle with n index qubits: qubits 0..n-1 hold the grid
index i (least-significant first), qubit n is the ancilla whose |1> branch is
the good state.
"""
import math
from typing import Callable, Dict, List, Literal, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.linalg import hadamard as walsh_matrix

from logger import setup_logger
from qfode import statevector as sv
from qfode.errors import ResourceError
from qfode.settings import get_settings

logger = setup_logger(__name__)

Backend = Literal["circuit", "analytic"]
GridKind = Literal["endpoint", "midpoint"]
BACKENDS = ("circuit", "analytic")


class SinSqIntegrand(BaseModel):
    """Integral of sin^2(m z + c) over [b_min, b_max]."""
    m: float = Field(description="Radian slope per unit z")
    c: float = Field(description="Radian offset")
    b_min: float = 0.0
    b_max: float = 1.0

    @model_validator(mode="after")
    def _check_bounds(self):
        if not self.b_max > self.b_min:
            raise ValueError(f"b_max ({self.b_max}) must exceed b_min ({self.b_min})")
        return self

    def closed_form(self) -> float:
        width = self.b_max - self.b_min
        if self.m == 0:
            return width * math.sin(self.c) ** 2
        antiderivative = lambda z: z / 2 - math.sin(2 * (self.m * z + self.c)) / (4 * self.m)
        return antiderivative(self.b_max) - antiderivative(self.b_min)


class GeneralIntegrand(BaseModel):
    """Samples g(z_i) in [0, 1] with the scaling pair used to recover f."""
    samples: List[float]
    f_min: float = 0.0
    f_max: float = 1.0
    b_min: float = 0.0
    b_max: float = 1.0

    @model_validator(mode="after")
    def _check_samples(self):
        bad = [g for g in self.samples if not 0.0 <= g <= 1.0]
        if bad:
            raise ValueError(f"Scaled samples must lie in [0, 1], got {bad[:3]}")
        if self.f_max < self.f_min:
            raise ValueError("f_max must not be smaller than f_min")
        return self

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], n_index_qubits: int,
                      b_min: float = 0.0, b_max: float = 1.0,
                      grid: GridKind = "endpoint") -> "GeneralIntegrand":
        values = np.asarray(f(grid_points(b_min, b_max, n_index_qubits, grid)), dtype=float)
        f_min, f_max = float(values.min()), float(values.max())
        if f_max == f_min:
            # constant function: nothing to scale
            scaled = np.zeros_like(values)
        else:
            scaled = np.clip((values - f_min) / (f_max - f_min), 0.0, 1.0)
        return cls(samples=scaled.tolist(), f_min=f_min, f_max=f_max, b_min=b_min, b_max=b_max)


class Gate(NamedTuple):
    name: str
    targets: Tuple[int, ...]
    controls: Tuple[int, ...]
    matrix: np.ndarray


class OracleCircuit:
    """State preparation A = R (H^n x I) as an explicit gate list."""

    def __init__(self, n_index_qubits: int, gates: List[Gate],
                 alpha: Optional[float] = None, theta: Optional[float] = None):
        self.n_index_qubits = n_index_qubits
        self.gates = gates
        self.alpha = alpha
        self.theta = theta

    @property
    def num_qubits(self) -> int:
        return self.n_index_qubits + 1

    @property
    def ancilla(self) -> int:
        return self.n_index_qubits

    def describe(self) -> List[str]:
        return [f"{g.name} t={list(g.targets)} c={list(g.controls)}" for g in self.gates]

    def apply(self, state: sv.StateVector, offset: int = 0) -> sv.StateVector:
        for gate in self.gates:
            state = sv.apply_controlled_unitary(
                state, [c + offset for c in gate.controls],
                [t + offset for t in gate.targets], gate.matrix)
        return state

    def apply_inverse(self, state: sv.StateVector, offset: int = 0) -> sv.StateVector:
        for gate in reversed(self.gates):
            state = sv.apply_controlled_unitary(
                state, [c + offset for c in gate.controls],
                [t + offset for t in gate.targets], gate.matrix.conj().T)
        return state

    def unitary(self) -> np.ndarray:
        """Dense matrix of A, built by pushing the identity through the gates."""
        n = self.num_qubits
        dim = 2 ** n
        _check_dense_dim(dim)
        tensor = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))
        for gate in self.gates:
            tensor = sv._apply_controlled_matrix(tensor, n, gate.controls, gate.targets,
                                                 gate.matrix)
        return tensor.reshape(dim, dim)

    def prepare(self) -> sv.StateVector:
        return self.apply(sv.new_zero_state(self.num_qubits))

    def good_probability(self) -> float:
        return sv.marginal_probability(self.prepare(), self.ancilla, 1)


class AmplitudeEstimate(BaseModel):
    a_hat: float = Field(ge=0.0, le=1.0)
    theta_hat: float = Field(ge=0.0, le=math.pi / 2)
    m_eval_qubits: int
    most_probable: int
    outcome_distribution: Dict[int, float]


def _check_dense_dim(dim: int):
    cap = get_settings().max_dense_dim
    if dim > cap:
        raise ResourceError(f"Dense operator of dimension {dim} exceeds the cap of {cap}")


def grid_points(b_min: float, b_max: float, n_index_qubits: int,
                grid: GridKind = "endpoint") -> np.ndarray:
    """The 2^n evaluation points z_i of the Riemann sum."""
    count = 2 ** n_index_qubits
    index = np.arange(count)
    if grid == "endpoint":
        return b_min + index * ((b_max - b_min) / (count - 1))
    if grid == "midpoint":
        return b_min + (index + 0.5) * ((b_max - b_min) / count)
    raise ValueError(f"Unknown grid {grid!r}")


def _hadamard_layer(n_index_qubits: int) -> List[Gate]:
    return [Gate("H", (q,), (), sv.hadamard()) for q in range(n_index_qubits)]


def build_sin_sq_oracle(integrand: SinSqIntegrand, n_index_qubits: int,
                        grid: GridKind = "endpoint") -> OracleCircuit:
    """Ancilla amplitude sin(m z_i + c) from one R_y(2 alpha) and n controlled R_y."""
    if n_index_qubits < 1:
        raise ValueError(f"Need at least one index qubit, got {n_index_qubits}")

    count = 2 ** n_index_qubits
    if grid == "endpoint":
        delta = (integrand.b_max - integrand.b_min) / (count - 1)
        start = integrand.b_min
    elif grid == "midpoint":
        delta = (integrand.b_max - integrand.b_min) / count
        start = integrand.b_min + delta / 2
    else:
        raise ValueError(f"Unknown grid {grid!r}")

    theta = integrand.m * delta
    alpha = integrand.m * start + integrand.c
    ancilla = n_index_qubits

    gates = _hadamard_layer(n_index_qubits)
    gates.append(Gate("RY", (ancilla,), (), sv.ry(2 * alpha)))
    for j in range(n_index_qubits):
        # bit j carries weight 2^j, i.e. an extra 2^j * theta on the ancilla angle
        gates.append(Gate("CRY", (ancilla,), (j,), sv.ry(2 ** (j + 1) * theta)))

    return OracleCircuit(n_index_qubits, gates, alpha=alpha, theta=theta)


def multiplexed_ry_angles(target_angles: np.ndarray) -> np.ndarray:
    """
    Angles of the Gray-code CNOT/R_y ladder realizing R_y(target_angles[c])
    conditioned on control value c.

    Step i applies R_y(angles[i]) followed by a CNOT from the control bit where
    gray(i) and gray(i+1) differ, so control value c sees
    sum_i (-1)^{popcount(c & gray(i))} angles[i].
    """
    count = len(target_angles)
    gray = np.arange(count) ^ (np.arange(count) >> 1)
    return walsh_matrix(count)[:, gray].T @ np.asarray(target_angles, dtype=float) / count


def build_general_oracle(integrand: GeneralIntegrand, n_index_qubits: int) -> OracleCircuit:
    """Encode arbitrary samples g(z_i) with a uniformly controlled R_y."""
    count = 2 ** n_index_qubits
    if len(integrand.samples) != count:
        raise ValueError(f"Expected {count} samples for {n_index_qubits} index qubits, "
                         f"got {len(integrand.samples)}")

    phis = 2 * np.arcsin(np.sqrt(np.asarray(integrand.samples, dtype=float)))
    angles = multiplexed_ry_angles(phis)
    ancilla = n_index_qubits

    gates = _hadamard_layer(n_index_qubits)
    for i in range(count):
        gates.append(Gate("RY", (ancilla,), (), sv.ry(angles[i])))
        changed = (i ^ (i >> 1)) ^ (((i + 1) % count) ^ (((i + 1) % count) >> 1))
        if changed:
            control = int(changed).bit_length() - 1
            gates.append(Gate("CX", (ancilla,), (control,), sv.pauli_x()))

    logger.debug(f"General oracle uses {len(gates)} gates for {count} samples")
    return OracleCircuit(n_index_qubits, gates)


def grover_operator(oracle: OracleCircuit) -> np.ndarray:
    """Q = -A S_0 A^dagger S_chi as a dense unitary on the oracle register."""
    dim = 2 ** oracle.num_qubits
    _check_dense_dim(dim)

    a = oracle.unitary()
    s_zero = np.ones(dim)
    s_zero[0] = -1.0
    ancilla_bit = (np.arange(dim) >> oracle.ancilla) & 1
    s_chi = np.where(ancilla_bit == 1, -1.0, 1.0)

    return -(a * s_zero[None, :]) @ (a.conj().T * s_chi[None, :])


def qae_error_bound(m_eval_qubits: int) -> float:
    size = 2 ** m_eval_qubits
    return math.pi / size + math.pi ** 2 / size ** 2


def run_qae(oracle: OracleCircuit, m_eval_qubits: int) -> AmplitudeEstimate:
    """Canonical phase estimation of Q with an exact outcome distribution."""
    if m_eval_qubits < 1:
        raise ValueError(f"Need at least one evaluation qubit, got {m_eval_qubits}")

    n_sys = oracle.num_qubits
    total = n_sys + m_eval_qubits
    cap = get_settings().max_qubits
    if total > cap:
        raise ResourceError(f"QAE needs {total} qubits, cap is {cap}")

    system = list(range(n_sys))
    evaluation = list(range(n_sys, total))

    state = oracle.apply(sv.new_zero_state(total))
    for q in evaluation:
        state = sv.apply_single_qubit(state, q, sv.hadamard())

    power = grover_operator(oracle)
    for j, q in enumerate(evaluation):
        state = sv.apply_controlled_unitary(state, [q], system, power)
        if j < m_eval_qubits - 1:
            power = power @ power

    state = sv.inverse_qft(state, evaluation)
    distribution = sv.marginal_distribution(state, evaluation)

    size = 2 ** m_eval_qubits
    # y and size - y are mirror images; take the smaller one on ties
    peak = distribution.max()
    best = int(np.flatnonzero(distribution >= peak - 1e-12)[0])
    folded = min(best, size - best)
    theta_hat = math.pi * folded / size

    return AmplitudeEstimate(
        a_hat=min(max(math.sin(theta_hat) ** 2, 0.0), 1.0),
        theta_hat=theta_hat,
        m_eval_qubits=m_eval_qubits,
        most_probable=best,
        outcome_distribution={int(y): float(p) for y, p in enumerate(distribution)},
    )


def riemann_mean(integrand: SinSqIntegrand, n_index_qubits: int,
                 grid: GridKind = "endpoint") -> float:
    z = grid_points(integrand.b_min, integrand.b_max, n_index_qubits, grid)
    return float(np.mean(np.sin(integrand.m * z + integrand.c) ** 2))


def estimate_integral(integrand: SinSqIntegrand, n_index_qubits: int, m_eval_qubits: int,
                      backend: Backend = "circuit", grid: GridKind = "endpoint") -> float:
    """I = (b_max - b_min) * mean of sin^2(m z_i + c) over the oracle grid."""
    if backend not in BACKENDS:
        raise ValueError(f"Unknown backend {backend!r}, expected one of {BACKENDS}")

    width = integrand.b_max - integrand.b_min
    if backend == "analytic":
        return width * riemann_mean(integrand, n_index_qubits, grid)

    oracle = build_sin_sq_oracle(integrand, n_index_qubits, grid)
    estimate = run_qae(oracle, m_eval_qubits)
    logger.debug(f"QAE m={integrand.m:.6g} c={integrand.c:.6g}: a_hat={estimate.a_hat:.10f}")
    return width * estimate.a_hat


def estimate_general_integral(integrand: GeneralIntegrand, n_index_qubits: int,
                              m_eval_qubits: int, backend: Backend = "circuit") -> float:
    """I = (b_max - b_min) * (f_min + (f_max - f_min) * g_bar)."""
    if backend not in BACKENDS:
        raise ValueError(f"Unknown backend {backend!r}, expected one of {BACKENDS}")

    if backend == "analytic":
        g_bar = float(np.mean(integrand.samples))
    else:
        g_bar = run_qae(build_general_oracle(integrand, n_index_qubits), m_eval_qubits).a_hat

    width = integrand.b_max - integrand.b_min
    return width * (integrand.f_min + (integrand.f_max - integrand.f_min) * g_bar)
