"""
Semi-discrete test problems.

Fields live on a uniform mesh as arrays of shape (components, ny, nx) with x
along the last axis; ``GridField`` is the flattened (components, nx*ny) view
handed to callers. Every model evaluates its right-hand side in series mode:
given the Taylor coefficients of the state, ``rhs_series(series, q)`` returns
coefficient q of f(state), exactly, because all couplings are polynomials of
degree at most two. Boundary nodes have f = 0; their values are set by
``apply_bcs``.
"""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.special import expit

from logger import setup_logger
from qfode.errors import ConfigurationError
from qfode.power_series import cauchy_term, constant_term

logger = setup_logger(__name__)

DEFAULT_CFL = 0.8
INTERIOR = (slice(1, -1), slice(1, -1))


class Mesh2D(BaseModel):
    nx: int = Field(ge=3)
    ny: int = Field(ge=3)
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0

    @model_validator(mode="after")
    def _check_domain(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("Mesh bounds must be increasing")
        return self

    @classmethod
    def square(cls, points: int) -> "Mesh2D":
        return cls(nx=points, ny=points)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """X, Y arrays of shape (ny, nx)."""
        return np.meshgrid(self.x, self.y)

    def boundary_mask(self) -> np.ndarray:
        mask = np.ones((self.ny, self.nx), dtype=bool)
        mask[INTERIOR] = False
        return mask


@dataclass
class GridField:
    components: Tuple[str, ...]
    values: np.ndarray
    mesh: Optional[Mesh2D] = None

    def __post_init__(self):
        self.components = tuple(self.components)
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.components), -1)
        if self.mesh is not None and self.values.shape[1] != self.mesh.nx * self.mesh.ny:
            raise ValueError(f"Field has {self.values.shape[1]} points per component, "
                             f"mesh has {self.mesh.nx * self.mesh.ny}")

    @property
    def grid(self) -> np.ndarray:
        if self.mesh is None:
            return self.values
        return self.values.reshape(len(self.components), self.mesh.ny, self.mesh.nx)

    def component(self, name: str) -> np.ndarray:
        if name not in self.components:
            raise KeyError(f"No component {name!r} in {self.components}")
        return self.grid[self.components.index(name)]

    def copy(self) -> "GridField":
        return GridField(self.components, self.values.copy(), self.mesh)


# stencils on (..., ny, nx) arrays, returning interior-sized arrays

def _east(a):
    return a[..., 1:-1, 2:]


def _west(a):
    return a[..., 1:-1, :-2]


def _north(a):
    return a[..., 2:, 1:-1]


def _south(a):
    return a[..., :-2, 1:-1]


def _centre(a):
    return a[..., 1:-1, 1:-1]


def laplacian(a: np.ndarray, dx: float, dy: float) -> np.ndarray:
    return ((_east(a) - 2 * _centre(a) + _west(a)) / dx ** 2
            + (_north(a) - 2 * _centre(a) + _south(a)) / dy ** 2)


class ModelSpec:
    """Base for all models; subclasses fill in the physics."""

    name = "model"
    components: Tuple[str, ...] = ("u",)
    coupling_degree = 2

    def __init__(self, mesh: Optional[Mesh2D], cfl_number: float = DEFAULT_CFL):
        if not 0 < cfl_number < 1:
            raise ValueError(f"CFL number must be in (0, 1), got {cfl_number}")
        self.mesh = mesh
        self.cfl_number = cfl_number

    @property
    def state_shape(self) -> Tuple[int, ...]:
        return (len(self.components), self.mesh.ny, self.mesh.nx)

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.mesh.boundary_mask()

    def _interior_only(self, interior: np.ndarray) -> np.ndarray:
        out = np.zeros(interior.shape[:-2] + (self.mesh.ny, self.mesh.nx))
        out[..., 1:-1, 1:-1] = interior
        return out

    def rhs_series(self, series: np.ndarray, q: int) -> np.ndarray:
        raise NotImplementedError

    def rhs(self, values: np.ndarray) -> np.ndarray:
        return self.rhs_series(np.asarray(values, dtype=float)[None], 0)

    def apply_bcs(self, values: np.ndarray, t: float) -> np.ndarray:
        return np.array(values, dtype=float)

    def initial_values(self) -> np.ndarray:
        raise NotImplementedError

    def exact_solution(self, t: float) -> Optional[np.ndarray]:
        return None

    def cfl_time_scale(self, values: np.ndarray) -> float:
        raise NotImplementedError

    def constraint_residual(self, values: np.ndarray) -> float:
        """Residual of any algebraic constraint a steady state must also satisfy."""
        return 0.0

    def to_field(self, values: np.ndarray) -> GridField:
        return GridField(self.components, values, self.mesh)

    def initial_condition(self) -> GridField:
        return self.to_field(self.initial_values())


class HeatModel(ModelSpec):
    name = "heat"
    coupling_degree = 1

    def __init__(self, mesh: Mesh2D, alpha_sq: float = 1.0, cfl_number: float = DEFAULT_CFL):
        super().__init__(mesh, cfl_number)
        if alpha_sq <= 0:
            raise ValueError(f"alpha_sq must be positive, got {alpha_sq}")
        self.alpha_sq = alpha_sq

    def rhs_series(self, series, q):
        u = series[q]
        return self._interior_only(self.alpha_sq * laplacian(u, self.mesh.dx, self.mesh.dy))

    def apply_bcs(self, values, t):
        out = np.array(values, dtype=float)
        out[:, self.boundary_mask] = 0.0
        return out

    def initial_values(self):
        x, y = self.mesh.coordinates()
        return self.apply_bcs((np.sin(np.pi * x) * np.sin(np.pi * y))[None], 0.0)

    def exact_solution(self, t):
        x, y = self.mesh.coordinates()
        decay = math.exp(-2 * self.alpha_sq * math.pi ** 2 * t)
        return (np.sin(np.pi * x) * np.sin(np.pi * y) * decay)[None]

    def diffusive_time_scale(self) -> float:
        return self.cfl_number / (2 * self.alpha_sq
                                  * (1 / self.mesh.dx ** 2 + 1 / self.mesh.dy ** 2))

    def cfl_time_scale(self, values):
        return self.diffusive_time_scale()


class _ViscousModel(ModelSpec):
    """Shared Dirichlet-from-exact handling and CFL for the Burgers models."""

    def __init__(self, mesh: Mesh2D, nu: float, cfl_number: float = DEFAULT_CFL):
        super().__init__(mesh, cfl_number)
        if nu <= 0:
            raise ValueError(f"Viscosity nu must be positive, got {nu}")
        self.nu = nu

    def apply_bcs(self, values, t):
        out = np.array(values, dtype=float)
        mask = self.boundary_mask
        out[:, mask] = self.exact_solution(t)[:, mask]
        return out

    def initial_values(self):
        return self.exact_solution(0.0)

    def cfl_time_scale(self, values):
        mesh = self.mesh
        diffusive = self.cfl_number / (2 * self.nu * (1 / mesh.dx ** 2 + 1 / mesh.dy ** 2))
        speed = float(np.max(np.abs(values)))
        if speed == 0.0:
            return diffusive
        convective = self.cfl_number * min(mesh.dx, mesh.dy) / speed
        return min(diffusive, convective)


class BurgersModel(_ViscousModel):
    name = "burgers"

    def rhs_series(self, series, q):
        mesh = self.mesh
        u = series[:q + 1, 0]
        square = cauchy_term(u, u, q)
        rate = (-(_centre(square) - _west(square)) / (2 * mesh.dx)
                - (_centre(square) - _south(square)) / (2 * mesh.dy)
                + self.nu * laplacian(u[q], mesh.dx, mesh.dy))
        return self._interior_only(rate[None])

    def exact_solution(self, t):
        x, y = self.mesh.coordinates()
        return expit(-(x + y - t) / (2 * self.nu))[None]


class CoupledBurgersModel(_ViscousModel):
    name = "coupled"
    components = ("u", "v")

    def rhs_series(self, series, q):
        mesh = self.mesh
        u = series[:q + 1, 0]
        v = series[:q + 1, 1]
        out = []
        for w in (u, v):
            # upwind differences keep the 1/(2 dx) factor of the scheme
            dwx = (_centre(w) - _west(w)) / (2 * mesh.dx)
            dwy = (_centre(w) - _south(w)) / (2 * mesh.dy)
            rate = (-cauchy_term(_centre(u), dwx, q) - cauchy_term(_centre(v), dwy, q)
                    + self.nu * laplacian(w[q], mesh.dx, mesh.dy))
            out.append(rate)
        return self._interior_only(np.stack(out))

    def exact_solution(self, t):
        x, y = self.mesh.coordinates()
        shift = expit(-(-4 * x + 4 * y - t) / (32 * self.nu)) / 4
        return np.stack([0.75 - shift, 0.75 + shift])


class CavityModel(ModelSpec):
    """Vorticity-stream function cavity with a pseudo-time Poisson relaxation."""

    name = "cavity"
    components = ("omega", "psi")

    def __init__(self, mesh: Mesh2D, re: float = 100.0, lid_speed: float = 1.0,
                 cfl_number: float = DEFAULT_CFL):
        super().__init__(mesh, cfl_number)
        if not math.isclose(mesh.dx, mesh.dy, rel_tol=1e-12):
            raise ValueError(f"Cavity needs a square mesh spacing, got dx={mesh.dx}, "
                             f"dy={mesh.dy}")
        if re <= 0:
            raise ValueError(f"Reynolds number must be positive, got {re}")
        self.re = re
        self.lid_speed = lid_speed
        self.h = mesh.dx

    def _interior_velocities(self, psi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u = (_north(psi) - _south(psi)) / (2 * self.h)
        v = -(_east(psi) - _west(psi)) / (2 * self.h)
        return u, v

    def rhs_series(self, series, q):
        h = self.h
        omega = series[:q + 1, 0]
        psi = series[:q + 1, 1]
        u, v = self._interior_velocities(psi)

        convection = (cauchy_term(u, _east(omega) - _west(omega), q)
                      + cauchy_term(v, _north(omega) - _south(omega), q)) / (2 * h)
        omega_rate = -convection + laplacian(omega[q], h, h) / self.re

        neighbours = _east(psi[q]) + _west(psi[q]) + _north(psi[q]) + _south(psi[q])
        psi_rate = (neighbours + _centre(omega[q]) * h ** 2) / 4 - _centre(psi[q])

        return self._interior_only(np.stack([omega_rate, psi_rate]))

    def apply_bcs(self, values, t):
        out = np.array(values, dtype=float)
        omega, psi = out[0], out[1]
        h2 = self.h ** 2

        psi[self.boundary_mask] = 0.0
        omega[:, 0] = -2 * (psi[:, 1] - psi[:, 0]) / h2
        omega[:, -1] = -2 * (psi[:, -2] - psi[:, -1]) / h2
        omega[0, :] = -2 * (psi[1, :] - psi[0, :]) / h2
        # moving lid last so it owns the top corners
        omega[-1, :] = -2 * (psi[-2, :] - psi[-1, :] + self.h * self.lid_speed) / h2
        return out

    def initial_values(self):
        return self.apply_bcs(np.zeros(self.state_shape), 0.0)

    def velocities(self, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(u, v) on the full mesh: u = psi_y, v = -psi_x, wall values from no-slip and lid."""
        values = np.asarray(values, dtype=float).reshape(self.state_shape)
        u = np.zeros((self.mesh.ny, self.mesh.nx))
        v = np.zeros_like(u)
        u[INTERIOR], v[INTERIOR] = self._interior_velocities(values[1])
        u[-1, :] = self.lid_speed
        return u, v

    def poisson_residual(self, values: np.ndarray) -> float:
        """max |psi_xx + psi_yy + omega| over interior nodes."""
        values = np.asarray(values, dtype=float).reshape(self.state_shape)
        residual = laplacian(values[1], self.h, self.h) + _centre(values[0])
        return float(np.max(np.abs(residual)))

    def constraint_residual(self, values):
        return self.poisson_residual(values)

    def cfl_time_scale(self, values):
        u, v = self.velocities(values)
        speed = max(float(np.max(np.abs(u))), float(np.max(np.abs(v))), abs(self.lid_speed))
        diffusive = self.cfl_number * self.h ** 2 * self.re / 4
        # psi relaxation has rates up to 2 per unit pseudo-time
        relaxation = self.cfl_number / 2
        scales = [diffusive, relaxation]
        if speed > 0:
            scales.append(self.cfl_number * self.h / speed)
        return min(scales)


class PolynomialODEModel(ModelSpec):
    """Autonomous u' = c0 + c1 u + c2 u^2 on a flat vector state."""

    name = "ode"

    def __init__(self, c0: float = 0.0, c1: float = 0.0, c2: float = 0.0,
                 y0: Sequence[float] = (1.0,), cfl_number: float = DEFAULT_CFL):
        super().__init__(None, cfl_number)
        self.c0, self.c1, self.c2 = float(c0), float(c1), float(c2)
        self.y0 = np.atleast_1d(np.asarray(y0, dtype=float))
        self.coupling_degree = 2 if self.c2 != 0 else 1

    @property
    def state_shape(self):
        return (1, self.y0.size)

    @property
    def boundary_mask(self):
        return np.zeros(self.y0.size, dtype=bool)

    def rhs_series(self, series, q):
        u = series[:q + 1]
        out = self.c1 * u[q] + constant_term(self.c0, q, u[q])
        if self.c2:
            out = out + self.c2 * cauchy_term(u, u, q)
        return out

    def initial_values(self):
        return self.y0.reshape(self.state_shape).copy()

    def cfl_time_scale(self, values):
        rate = abs(self.c1) + 2 * abs(self.c2) * float(np.max(np.abs(values)))
        return math.inf if rate == 0 else self.cfl_number / rate


def build_heat_model(mesh: Mesh2D, alpha_sq: float = 1.0,
                     cfl_number: float = DEFAULT_CFL) -> HeatModel:
    return HeatModel(mesh, alpha_sq, cfl_number)


def build_burgers_model(mesh: Mesh2D, nu: float = 0.01,
                        cfl_number: float = DEFAULT_CFL) -> BurgersModel:
    return BurgersModel(mesh, nu, cfl_number)


def build_coupled_model(mesh: Mesh2D, nu: float = 0.01,
                        cfl_number: float = DEFAULT_CFL) -> CoupledBurgersModel:
    return CoupledBurgersModel(mesh, nu, cfl_number)


def build_cavity_model(mesh: Mesh2D, re: float = 100.0, lid_speed: float = 1.0,
                       cfl_number: float = DEFAULT_CFL) -> CavityModel:
    return CavityModel(mesh, re, lid_speed, cfl_number)


def build_polynomial_ode(c0: float = 0.0, c1: float = 0.0, c2: float = 0.0,
                         y0: Sequence[float] = (1.0,),
                         cfl_number: float = DEFAULT_CFL) -> PolynomialODEModel:
    return PolynomialODEModel(c0, c1, c2, y0, cfl_number)


def apply_bcs(field: GridField, model: ModelSpec, physical_time: float) -> GridField:
    values = model.apply_bcs(field.grid.reshape(model.state_shape), physical_time)
    return model.to_field(values)


def cfl_time_scale(field: GridField, model: ModelSpec) -> float:
    values = field.grid.reshape(model.state_shape)
    if not np.all(np.isfinite(values)):
        raise ValueError("CFL time scale needs a finite field")
    dt = model.cfl_time_scale(values)
    if not dt > 0:
        raise ConfigurationError(f"Model {model.name} has no usable CFL time scale")
    return dt
