"""Classical oracles: relative L2 error and a fixed-step RK4 integrator."""
import math
import time
from typing import Optional, Tuple, Union

import numpy as np

from logger import setup_logger
from qfode.errors import ConfigurationError, DivergenceError, UndefinedMetricError
from qfode.pde_models import GridField, ModelSpec

logger = setup_logger(__name__)

DEFAULT_STEADY_TOL = 1e-8
DEFAULT_MAX_STEPS = 2_000_000

FieldLike = Union[GridField, np.ndarray]


def _values(field: FieldLike) -> np.ndarray:
    return field.values if isinstance(field, GridField) else np.asarray(field, dtype=float)


def relative_l2(reference: FieldLike, candidate: FieldLike) -> float:
    """||u - u_hat||_2 / ||u||_2 over every grid point and component."""
    ref = _values(reference)
    cand = _values(candidate)
    if ref.size != cand.size:
        raise ValueError(f"Shape mismatch: reference {ref.shape}, candidate {cand.shape}")
    ref = ref.reshape(-1)
    norm = np.linalg.norm(ref)
    if norm == 0:
        raise UndefinedMetricError("Relative L2 error is undefined for a zero reference field")
    return float(np.linalg.norm(ref - cand.reshape(-1)) / norm)


def rk4_step(model: ModelSpec, y: np.ndarray, t: float, dt: float) -> np.ndarray:
    """One classical RK4 step with boundary values re-imposed at every stage time."""
    half = t + dt / 2
    k1 = model.rhs(y)
    k2 = model.rhs(model.apply_bcs(y + dt / 2 * k1, half))
    k3 = model.rhs(model.apply_bcs(y + dt / 2 * k2, half))
    k4 = model.rhs(model.apply_bcs(y + dt * k3, t + dt))
    return model.apply_bcs(y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), t + dt)


def integrate(model: ModelSpec, dt: float, total_time: Optional[float] = None,
              steady_tol: Optional[float] = None, max_steps: int = DEFAULT_MAX_STEPS,
              y0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, float, int, float]:
    """Returns (values, final time, steps, last steady residual)."""
    if dt <= 0:
        raise ConfigurationError(f"Reference time step must be positive, got {dt}")
    if (total_time is None) == (steady_tol is None):
        raise ConfigurationError("Give exactly one of total_time or steady_tol")

    y = model.initial_values() if y0 is None else np.asarray(y0, dtype=float).reshape(
        model.state_shape)
    dt_cfl = model.cfl_time_scale(y)
    if dt >= dt_cfl:
        raise ConfigurationError(f"Reference step dt={dt:.6g} is not below the CFL scale "
                                 f"{dt_cfl:.6g}")

    if total_time is not None:
        steps = max(1, math.ceil(total_time / dt - 1e-9))
        dt = total_time / steps
    else:
        steps = max_steps

    t = 0.0
    residual = math.inf
    for step in range(steps):
        y_next = rk4_step(model, y, t, dt)
        if not np.all(np.isfinite(y_next)):
            logger.error(f"Reference integration diverged at step {step}")
            raise DivergenceError(f"Non-finite values at reference step {step}", index=step)
        t += dt
        if steady_tol is not None:
            residual = float(np.max(np.abs(y_next - y))) / dt
            y = y_next
            if residual < steady_tol and model.constraint_residual(y) < steady_tol:
                return y, t, step + 1, residual
        else:
            y = y_next

    if steady_tol is not None:
        logger.warning(f"Reference run hit {max_steps} steps with residual {residual:.3e} "
                       f"above {steady_tol:.1e}")
    return y, t, steps, residual


def classical_reference_solve(model: ModelSpec, dt: float, total_time: Optional[float] = None,
                              steady_tol: Optional[float] = None,
                              max_steps: int = DEFAULT_MAX_STEPS) -> GridField:
    start = time.time()
    values, t, steps, residual = integrate(model, dt, total_time, steady_tol, max_steps)
    logger.info(f"Reference {model.name} run: {steps} RK4 steps to t={t:.6g} "
                f"in {time.time() - start:.2f} seconds")
    return model.to_field(values)
