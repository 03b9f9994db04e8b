"""
Taylor time stepping over nested subintervals.

[0, T] is split into n subintervals of length h, each into N_k sub-subintervals
of length h_bar. On every sub-subinterval the solution is replaced by its
degree-(r+1) Taylor polynomial A_{i,j}; pieces are chained by evaluating the
previous piece at the shared boundary. The node value at the end of a
subinterval is

    y_{i+1} = y_i + h_bar * sum_j int_0^1 f(A_{i,j}(t_{i,j} + h_bar z)) dz

where the integral goes through the Fourier reduction in ``fourier_quadrature``.
"""
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from logger import setup_logger
from qfode import power_series
from qfode.errors import ConfigurationError, DivergenceError
from qfode.fourier_quadrature import (
    PolynomialInZ,
    QuadratureConfig,
    UniversalIntegralCache,
    assemble_update,
    half_range_fourier,
    populate_universal_integrals,
)
from qfode.pde_models import GridField, ModelSpec
from qfode.settings import get_settings

logger = setup_logger(__name__)

MAX_ORDER = 6


class TimePartition(BaseModel):
    total_time: float = Field(gt=0)
    n: int = Field(ge=1, description="Number of subintervals")
    n_sub: int = Field(ge=1, description="Sub-subintervals per subinterval (N_k)")
    k: Optional[int] = Field(default=None, description="Nesting exponent, N_k = n^(k-1)")
    epsilon1: Optional[float] = None
    dt_cfl: float = Field(default=math.inf, gt=0)

    @property
    def h(self) -> float:
        return self.total_time / self.n

    @property
    def h_bar(self) -> float:
        return self.h / self.n_sub

    def summary(self) -> str:
        return (f"n={self.n}, k={self.k}, N_k={self.n_sub}, h={self.h:.6g}, "
                f"h_bar={self.h_bar:.6g}, dt_cfl={self.dt_cfl:.6g}")


def nesting_exponent(epsilon1: float, n: int) -> int:
    """Smallest k with n^(k-1) >= 1/epsilon1."""
    target = 1.0 / epsilon1
    k = 1 + max(0, math.ceil(math.log(target) / math.log(n)))
    # integer powers settle rounding in the logarithms
    while n ** (k - 1) < target:
        k += 1
    while k > 1 and n ** (k - 2) >= target:
        k -= 1
    return k


def select_partition(total_time: float, dt_cfl: float, epsilon1: float, n: int,
                     max_nesting: Optional[int] = None) -> TimePartition:
    if total_time <= 0:
        raise ConfigurationError(f"Total time must be positive, got {total_time}")
    if not dt_cfl > 0:
        raise ConfigurationError(f"CFL time scale must be positive, got {dt_cfl}")
    if not 0 < epsilon1 < 1:
        raise ConfigurationError(f"epsilon1 must lie in (0, 1), got {epsilon1}")
    if n < 2:
        raise ConfigurationError(f"Need at least 2 subintervals, got {n}")

    cap = max_nesting or get_settings().max_nesting
    k = nesting_exponent(epsilon1, n)
    chosen = k
    while total_time / n ** k >= dt_cfl:
        k += 1
        if k > cap:
            raise ConfigurationError(f"Nesting exponent would exceed the cap of {cap} to satisfy "
                                     f"h_bar < dt_cfl={dt_cfl:.6g}")
    if k > cap:
        raise ConfigurationError(f"Nesting exponent {k} exceeds the cap of {cap}")
    if k != chosen:
        logger.warning(f"Raised k from {chosen} to {k} so that h_bar={total_time / n ** k:.6g} "
                       f"stays below dt_cfl={dt_cfl:.6g}")

    return TimePartition(total_time=total_time, n=n, n_sub=n ** (k - 1), k=k,
                         epsilon1=epsilon1, dt_cfl=dt_cfl)


def fixed_partition(h: float, n_sub: int, max_subintervals: int,
                    dt_cfl: float = math.inf) -> TimePartition:
    """Explicit subinterval length and N_k, for runs stopped by a steady-state test."""
    if h <= 0 or n_sub < 1 or max_subintervals < 1:
        raise ConfigurationError(f"Invalid fixed partition h={h}, N_k={n_sub}, "
                                 f"n={max_subintervals}")
    if h / n_sub >= dt_cfl:
        raise ConfigurationError(f"h_bar={h / n_sub:.6g} is not below dt_cfl={dt_cfl:.6g}")
    return TimePartition(total_time=h * max_subintervals, n=max_subintervals, n_sub=n_sub,
                         dt_cfl=dt_cfl)


@dataclass
class TaylorPiece:
    """coefficients[q] multiplies (t - start_time)^q, q = 0..order+1."""
    start_time: float
    h_bar: float
    coefficients: np.ndarray
    order: int

    @property
    def value(self) -> np.ndarray:
        return self.coefficients[0]

    def evaluate(self, t: float) -> np.ndarray:
        return power_series.evaluate(self.coefficients, t - self.start_time)

    def end_value(self) -> np.ndarray:
        return power_series.evaluate(self.coefficients, self.h_bar)


@dataclass
class Trajectory:
    times: List[float] = field(default_factory=list)
    values: List[np.ndarray] = field(default_factory=list)
    steps: int = 0
    stopped_early: bool = False

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    @property
    def final_time(self) -> float:
        return self.times[-1]

    def record(self, t: float, values: np.ndarray):
        self.times.append(t)
        self.values.append(np.array(values, copy=True))


def _as_state(y, model: ModelSpec) -> np.ndarray:
    if isinstance(y, GridField):
        y = y.grid
    return np.asarray(y, dtype=float).reshape(model.state_shape)


def taylor_expand(y, model: ModelSpec, t_start: float, order: int,
                  h_bar: float = 0.0) -> TaylorPiece:
    """U_0 = y, U_{q+1} = F_q / (q + 1) with F_q the q-th series coefficient of f(U)."""
    if order < 0 or order > MAX_ORDER:
        raise ValueError(f"Taylor order must be in 0..{MAX_ORDER}, got {order}")

    state = _as_state(y, model)
    coefficients = np.zeros((order + 2,) + state.shape)
    coefficients[0] = state
    for q in range(order + 1):
        coefficients[q + 1] = model.rhs_series(coefficients, q) / (q + 1)
    return TaylorPiece(t_start, h_bar, coefficients, order)


def compose_driving_polynomial(piece: TaylorPiece, model: ModelSpec) -> PolynomialInZ:
    """f(A(t_start + h_bar z)) as an exact polynomial in z."""
    degree = (piece.order + 1) * model.coupling_degree
    scaled = power_series.pad(power_series.rescale(piece.coefficients, piece.h_bar), degree)
    rows = [model.rhs_series(scaled, p) for p in range(degree + 1)]
    return PolynomialInZ(np.stack(rows))


def _check_finite(values: np.ndarray, what: str, index: int):
    if not np.all(np.isfinite(values)):
        logger.error(f"Non-finite values in {what} {index}")
        raise DivergenceError(f"Non-finite values in {what} {index}", index=index)


def iter_subinterval_pieces(y_i, model: ModelSpec, partition: TimePartition, order: int,
                            t_start: float = 0.0) -> Iterator[TaylorPiece]:
    """Chain Taylor pieces across one subinterval.

    Each piece starts from the previous piece evaluated at its end, with the
    boundary conditions reapplied at the new start time. Continuity is exact on
    interior nodes; boundary nodes with time-dependent conditions (Burgers) take
    the boundary value instead of the previous piece's end value.
    """
    value = _as_state(y_i, model)
    _check_finite(value, "sub-subinterval", 0)
    for j in range(partition.n_sub):
        t = t_start + j * partition.h_bar
        value = model.apply_bcs(value, t)
        piece = taylor_expand(value, model, t, order, partition.h_bar)
        _check_finite(piece.coefficients, "sub-subinterval", j)
        yield piece
        value = piece.end_value()


def propagate_subinterval(y_i, model: ModelSpec, partition: TimePartition, order: int,
                          t_start: float = 0.0) -> List[TaylorPiece]:
    return list(iter_subinterval_pieces(y_i, model, partition, order, t_start))


def advance_subinterval(y_i, pieces: Iterable[TaylorPiece], model: ModelSpec, n_f: int,
                        quad_config: QuadratureConfig, cache: UniversalIntegralCache,
                        t_next: Optional[float] = None) -> np.ndarray:
    total = None
    h_bar = None
    for piece in pieces:
        poly = compose_driving_polynomial(piece, model).coefficients
        if total is None:
            total = poly.copy()
        elif poly.shape[0] > total.shape[0]:
            poly[:total.shape[0]] += total
            total = poly
        else:
            total[:poly.shape[0]] += poly
        h_bar = piece.h_bar
    if total is None:
        raise ValueError("advance_subinterval needs at least one Taylor piece")

    series = half_range_fourier(PolynomialInZ(total), n_f, quad_config.extension)
    populate_universal_integrals(n_f, quad_config, cache)
    universal = cache.lookup(n_f, quad_config)

    y_next = assemble_update(_as_state(y_i, model), series, h_bar, universal)
    if t_next is not None:
        y_next = model.apply_bcs(y_next, t_next)
    return y_next


StepCallback = Callable[[int, float, np.ndarray, np.ndarray, float], bool]


class SteadyStateMonitor:
    """
    Stops a run once max |y_{i+1} - y_i| / h drops below the tolerance and the
    model's steady-state constraint (the cavity Poisson residual) does too.
    """

    def __init__(self, tol: float, model: Optional[ModelSpec] = None):
        if tol <= 0:
            raise ValueError(f"Steady-state tolerance must be positive, got {tol}")
        self.tol = tol
        self.model = model
        self.residual = math.inf
        self.constraint = math.inf
        self.history: List[float] = []

    def __call__(self, step, t, previous, current, h) -> bool:
        self.residual = float(np.max(np.abs(current - previous))) / h
        self.history.append(self.residual)
        if step % 100 == 0:
            logger.debug(f"Step {step}: steady residual {self.residual:.3e}")
        if self.residual >= self.tol:
            return False
        self.constraint = 0.0 if self.model is None else self.model.constraint_residual(current)
        return self.constraint < self.tol


def steady_state_stop(tol: float, model: Optional[ModelSpec] = None) -> SteadyStateMonitor:
    return SteadyStateMonitor(tol, model)


def solve(model: ModelSpec, partition: TimePartition, n_f: int,
          quad_config: Optional[QuadratureConfig] = None, order: int = 2,
          callbacks: Sequence[StepCallback] = (), cache: Optional[UniversalIntegralCache] = None,
          record_every: int = 1, y0=None) -> Trajectory:
    quad_config = quad_config or QuadratureConfig()
    cache = cache if cache is not None else UniversalIntegralCache()
    if record_every < 1:
        raise ValueError(f"record_every must be positive, got {record_every}")

    start = time.time()
    logger.info(f"Solving {model.name} with {partition.summary()}, N_f={n_f}, r={order}, "
                f"backend={quad_config.backend}, extension={quad_config.extension.value}")
    populate_universal_integrals(n_f, quad_config, cache)

    y = model.initial_values() if y0 is None else _as_state(y0, model)
    trajectory = Trajectory()
    trajectory.record(0.0, y)

    for i in range(partition.n):
        t_i = i * partition.h
        t_next = (i + 1) * partition.h
        try:
            pieces = iter_subinterval_pieces(y, model, partition, order, t_i)
            y_next = advance_subinterval(y, pieces, model, n_f, quad_config, cache, t_next)
            _check_finite(y_next, "subinterval", i)
        except DivergenceError as e:
            e.trajectory = trajectory
            logger.error(f"Divergence in subinterval {i} at t={t_i:.6g}: {e}")
            raise

        stop = any([callback(i, t_next, y, y_next, partition.h) for callback in callbacks])
        y = y_next
        trajectory.steps = i + 1
        if (i + 1) % record_every == 0 or i + 1 == partition.n or stop:
            trajectory.record(t_next, y)
        logger.debug(f"Subinterval {i + 1}/{partition.n} done, t={t_next:.6g}")
        if stop:
            trajectory.stopped_early = True
            logger.info(f"Stopped after {i + 1} subintervals at t={t_next:.6g}")
            break

    logger.info(f"Solve completed in {time.time() - start:.2f} seconds")
    return trajectory
