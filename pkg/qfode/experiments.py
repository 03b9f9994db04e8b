"""
Experiment drivers behind the command line: full solves, classical reference
runs, mesh convergence, Fourier truncation sweeps and the integral demo.
"""
import math
import os
import time
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, model_validator

from logger import setup_logger
from qfode import results_io
from qfode.amplitude_estimation import (
    Backend,
    GridKind,
    SinSqIntegrand,
    estimate_integral,
    qae_error_bound,
)
from qfode.errors import ConfigurationError
from qfode.fourier_quadrature import (
    FourierExtension,
    QuadratureConfig,
    UniversalIntegralCache,
    populate_universal_integrals,
)
from qfode.pde_models import (
    CavityModel,
    Mesh2D,
    ModelSpec,
    build_burgers_model,
    build_cavity_model,
    build_coupled_model,
    build_heat_model,
    build_polynomial_ode,
)
from qfode.reference import integrate as reference_integrate
from qfode.reference import relative_l2
from qfode.settings import get_settings
from qfode.taylor_ode import (
    TimePartition,
    fixed_partition,
    select_partition,
    solve,
    steady_state_stop,
)

logger = setup_logger(__name__)

ModelName = Literal["heat", "burgers", "coupled", "cavity", "ode"]
DEFAULT_LINES = "x=0.5,y=0.5,x=0.1,y=0.1"


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    model: ModelName = "heat"

    # mesh and physics
    nx: int = Field(default=41, ge=3)
    ny: Optional[int] = Field(default=None, ge=3)
    alpha_sq: float = Field(default=1.0, gt=0)
    nu: float = Field(default=0.01, gt=0)
    re: float = Field(default=100.0, gt=0)
    lid_speed: float = 1.0
    ode_c0: float = 0.0
    ode_c1: float = -1.0
    ode_c2: float = 0.0
    ode_y0: float = 1.0
    cfl_number: float = Field(default=0.8, gt=0, lt=1)

    # time partition
    total_time: Optional[float] = Field(default=None, gt=0)
    epsilon1: float = Field(default=0.005, gt=0, lt=1)
    n: int = Field(default=16, ge=1, description="Number of subintervals")
    n_sub: Optional[int] = Field(default=None, ge=1, description="Explicit N_k")
    subinterval_length: Optional[float] = Field(default=None, gt=0)
    max_subintervals: int = Field(default=1_000_000, ge=1)
    steady_tol: Optional[float] = Field(default=None, gt=0)
    order: int = Field(default=2, ge=1, le=6)

    # quadrature
    n_fourier: int = Field(default=10, ge=0)
    backend: Backend = "analytic"
    n_index_qubits: int = Field(default=8, ge=1)
    m_eval_qubits: int = Field(default=8, ge=1)
    grid: GridKind = "endpoint"
    fourier_extension: FourierExtension = FourierExtension.ZERO_PADDED

    # outputs
    output_dir: str = "results"
    profile_lines: str = DEFAULT_LINES
    compare_reference: bool = True
    reference_dt: Optional[float] = Field(default=None, gt=0)
    reference_steady_tol: float = Field(default=1e-8, gt=0)
    record_every: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0, description="Seed for property-test sampling")

    @model_validator(mode="after")
    def _check_consistency(self):
        if self.ny is None:
            self.ny = self.nx
        fixed = self.subinterval_length is not None
        if fixed and self.n_sub is None:
            raise ValueError("subinterval_length needs an explicit n_sub")
        if fixed and self.total_time is None and self.steady_tol is None:
            raise ValueError("A fixed partition needs total_time or steady_tol")
        if not fixed and self.total_time is None:
            raise ValueError("total_time is required unless subinterval_length is given")
        if not fixed and self.n < 2:
            raise ValueError(f"Automatic partition needs n >= 2, got {self.n}")
        results_io.parse_lines(self.profile_lines)
        return self

    @property
    def run_name(self) -> str:
        return self.name or f"{self.model}_{self.nx}"

    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(backend=self.backend, n_index_qubits=self.n_index_qubits,
                                m_eval_qubits=self.m_eval_qubits, grid=self.grid,
                                extension=self.fourier_extension)

    def sampler(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


class RunReport(BaseModel):
    name: str
    model: str
    mesh: Optional[List[int]] = None
    partition: Dict[str, Optional[float]]
    n_fourier: int
    backend: str
    fourier_extension: str
    steps: int
    final_time: float
    stopped_early: bool = False
    relative_l2_exact: Optional[float] = None
    relative_l2_reference: Optional[float] = None
    steady_residual: Optional[float] = None
    poisson_residual: Optional[float] = None
    centerline_max_difference: Optional[float] = None
    universal_integrals: Dict[str, List[float]] = Field(default_factory=dict)
    timings: Dict[str, float] = Field(default_factory=dict)
    files: List[str] = Field(default_factory=list)


class ConvergenceTable(BaseModel):
    meshes: List[int]
    dx: List[float]
    errors: List[float]
    slope: float
    path: Optional[str] = None


class SweepTable(BaseModel):
    n_fourier: List[int]
    errors: List[float]
    path: Optional[str] = None


class IntegralDemo(BaseModel):
    m: float
    c: float
    closed_form: float
    analytic: float
    circuit: Optional[float] = None
    bound: float
    path: Optional[str] = None


def load_run_config(path: str, overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    """Flat key=value file plus overrides, validated into a RunConfig."""
    if not os.path.isfile(path):
        raise ConfigurationError(f"Config file not found: {path}")
    values = {k: v for k, v in dotenv_values(path).items() if v is not None and v != ""}
    values.update(overrides or {})
    logger.debug(f"Loaded {len(values)} setting(s) from {path}")
    return RunConfig(**values)


def parse_overrides(items: Sequence[str]) -> Dict[str, str]:
    overrides = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"Override {item!r} is not of the form key=value")
        overrides[key.strip()] = value.strip()
    return overrides


def build_model(config: RunConfig) -> ModelSpec:
    if config.model == "ode":
        return build_polynomial_ode(config.ode_c0, config.ode_c1, config.ode_c2,
                                    (config.ode_y0,), config.cfl_number)
    mesh = Mesh2D(nx=config.nx, ny=config.ny)
    if config.model == "heat":
        return build_heat_model(mesh, config.alpha_sq, config.cfl_number)
    if config.model == "burgers":
        return build_burgers_model(mesh, config.nu, config.cfl_number)
    if config.model == "coupled":
        return build_coupled_model(mesh, config.nu, config.cfl_number)
    return build_cavity_model(mesh, config.re, config.lid_speed, config.cfl_number)


def build_partition(config: RunConfig, model: ModelSpec) -> TimePartition:
    dt_cfl = model.cfl_time_scale(model.initial_values())
    if config.subinterval_length is not None:
        if config.total_time is not None:
            count = max(1, round(config.total_time / config.subinterval_length))
        else:
            count = config.max_subintervals
        return fixed_partition(config.subinterval_length, config.n_sub, count, dt_cfl)
    return select_partition(config.total_time, dt_cfl, config.epsilon1, config.n)


def output_root(config: RunConfig) -> str:
    base = get_settings().output_dir or config.output_dir
    return results_io.ensure_dir(os.path.join(base, config.run_name))


def _reference_dt(config: RunConfig, model: ModelSpec) -> float:
    if config.reference_dt is not None:
        return config.reference_dt
    dt_cfl = model.cfl_time_scale(model.initial_values())
    if math.isinf(dt_cfl):
        return (config.total_time or 1.0) / 1000
    return 0.5 * dt_cfl


def _run_reference(config: RunConfig, model: ModelSpec, total_time: Optional[float]):
    dt = _reference_dt(config, model)
    if config.steady_tol is not None:
        return reference_integrate(model, dt, steady_tol=config.reference_steady_tol,
                                   max_steps=10_000_000)
    return reference_integrate(model, dt, total_time=total_time)


def _write_outputs(config: RunConfig, model: ModelSpec, values: np.ndarray,
                   comparison: Optional[np.ndarray], out_dir: str, prefix: str) -> List[str]:
    if model.mesh is None:
        rows = np.column_stack([np.arange(values.size), values.reshape(-1)])
        return [results_io.write_csv(os.path.join(out_dir, f"{prefix}_state.csv"),
                                     ("index", "value"), rows)]

    files = [results_io.write_field(os.path.join(out_dir, f"{prefix}_field.csv"),
                                    model.to_field(values))]
    if comparison is None:
        return files

    lines = results_io.parse_lines(config.profile_lines)
    if isinstance(model, CavityModel):
        u, v = model.velocities(values)
        ref_u, ref_v = model.velocities(comparison)
        profiles = {"u": (u, ref_u), "v": (v, ref_v)}
    else:
        profiles = {name: (values[i], comparison[i]) for i, name in enumerate(model.components)}
    files += results_io.profiles_for(model.mesh, profiles, lines, out_dir)
    return files


def _write_report(report: RunReport, out_dir: str) -> RunReport:
    path = os.path.join(out_dir, "report.json")
    report.files.append(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(report.model_dump_json(indent=2))
    logger.info(f"Report written to {path}")
    return report


def load_report(path: str) -> RunReport:
    with open(path, encoding="utf-8") as f:
        return RunReport.model_validate_json(f.read())


def _centerline_difference(model: CavityModel, values: np.ndarray,
                           reference: np.ndarray) -> float:
    u, _ = model.velocities(values)
    ref_u, _ = model.velocities(reference)
    _, line = results_io.extract_line(u, model.mesh, "x", 0.5)
    _, ref_line = results_io.extract_line(ref_u, model.mesh, "x", 0.5)
    return float(np.max(np.abs(line - ref_line)) / abs(model.lid_speed or 1.0))


def run_solve(config: RunConfig, write_files: bool = True,
              cache: Optional[UniversalIntegralCache] = None) -> RunReport:
    start = time.time()
    timings = {}
    logger.info(f"Starting run {config.run_name}")

    model = build_model(config)
    partition = build_partition(config, model)
    timings["partition"] = time.time() - start

    quad = config.quadrature()
    cache = cache if cache is not None else UniversalIntegralCache()
    phase = time.time()
    populate_universal_integrals(config.n_fourier, quad, cache)
    universal = cache.lookup(config.n_fourier, quad)
    timings["universal_integrals"] = time.time() - phase

    callbacks = []
    monitor = None
    if config.steady_tol is not None:
        monitor = steady_state_stop(config.steady_tol, model)
        callbacks.append(monitor)

    phase = time.time()
    trajectory = solve(model, partition, config.n_fourier, quad, config.order, callbacks,
                       cache, config.record_every)
    timings["solve"] = time.time() - phase
    final = trajectory.final

    report = RunReport(
        name=config.run_name,
        model=config.model,
        mesh=[model.mesh.nx, model.mesh.ny] if model.mesh is not None else None,
        partition={"n": partition.n, "k": partition.k, "n_sub": partition.n_sub,
                   "h": partition.h, "h_bar": partition.h_bar, "dt_cfl": partition.dt_cfl,
                   "epsilon1": partition.epsilon1},
        n_fourier=config.n_fourier,
        backend=config.backend,
        fourier_extension=config.fourier_extension.value,
        steps=trajectory.steps,
        final_time=trajectory.final_time,
        stopped_early=trajectory.stopped_early,
        steady_residual=monitor.residual if monitor is not None else None,
        universal_integrals={"u1": list(universal.u1), "u2": list(universal.u2)},
    )

    exact = model.exact_solution(trajectory.final_time)
    if exact is not None:
        report.relative_l2_exact = relative_l2(exact, final)
        logger.info(f"Relative L2 error vs exact solution: {report.relative_l2_exact:.6e}")

    reference = None
    if config.compare_reference:
        phase = time.time()
        reference_total = None if config.steady_tol is not None else trajectory.final_time
        reference, *_ = _run_reference(config, model, reference_total)
        timings["reference"] = time.time() - phase
        report.relative_l2_reference = relative_l2(reference, final)
        logger.info(f"Relative L2 error vs classical reference: "
                    f"{report.relative_l2_reference:.6e}")

    if isinstance(model, CavityModel):
        report.poisson_residual = model.poisson_residual(final)
        if reference is not None:
            report.centerline_max_difference = _centerline_difference(model, final, reference)

    if write_files:
        out_dir = output_root(config)
        comparison = exact if exact is not None else reference
        report.files = _write_outputs(config, model, final, comparison, out_dir, "solution")
        timings["total"] = time.time() - start
        report.timings = timings
        _write_report(report, out_dir)
    else:
        timings["total"] = time.time() - start
        report.timings = timings

    logger.info(f"Run {config.run_name} completed in {timings['total']:.2f} seconds")
    return report


def run_reference(config: RunConfig, write_files: bool = True) -> RunReport:
    """Classical RK4 run of the same semi-discrete system, reported like a solve."""
    start = time.time()
    model = build_model(config)
    total = None if config.steady_tol is not None else config.total_time
    if total is None and config.steady_tol is None:
        raise ConfigurationError("Reference run needs total_time or steady_tol")
    values, final_time, steps, residual = _run_reference(config, model, total)

    exact = model.exact_solution(final_time)
    report = RunReport(
        name=f"{config.run_name}_reference",
        model=config.model,
        mesh=[model.mesh.nx, model.mesh.ny] if model.mesh is not None else None,
        partition={"dt": final_time / steps if steps else None},
        n_fourier=config.n_fourier,
        backend="classical",
        fourier_extension="none",
        steps=steps,
        final_time=final_time,
        steady_residual=residual if config.steady_tol is not None else None,
        relative_l2_exact=relative_l2(exact, values) if exact is not None else None,
    )
    if isinstance(model, CavityModel):
        report.poisson_residual = model.poisson_residual(values)

    report.timings = {"total": time.time() - start}
    if write_files:
        out_dir = output_root(config)
        report.files = _write_outputs(config, model, values, exact, out_dir, "reference")
        _write_report(report, out_dir)
    return report


def fit_convergence_slope(dx: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(dx)."""
    dx = np.asarray(dx, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if dx.size < 2 or dx.size != errors.size:
        raise ValueError("Need matching dx and error lists with at least two entries")
    if np.any(dx <= 0) or np.any(errors <= 0):
        raise ValueError("Slope fit needs positive spacings and errors")
    slope, _ = np.polyfit(np.log(dx), np.log(errors), 1)
    return float(slope)


def _run_error(config: RunConfig, cache: UniversalIntegralCache) -> float:
    report = run_solve(config, write_files=False, cache=cache)
    if report.relative_l2_exact is not None:
        return report.relative_l2_exact
    if report.relative_l2_reference is not None:
        return report.relative_l2_reference
    raise ConfigurationError(f"Model {config.model} has no exact solution; "
                             f"enable compare_reference")


def convergence_study(base_config: RunConfig, meshes: Sequence[int],
                      write_files: bool = True) -> ConvergenceTable:
    if len(meshes) < 3:
        raise ConfigurationError(f"Convergence study needs at least 3 meshes, got {len(meshes)}")
    if base_config.model in ("cavity", "ode"):
        raise ConfigurationError(f"No exact solution for model {base_config.model}")

    start = time.time()
    cache = UniversalIntegralCache()
    dx, errors = [], []
    for points in meshes:
        config = base_config.model_copy(update={"nx": points, "ny": points,
                                                "compare_reference": False})
        errors.append(_run_error(config, cache))
        dx.append(1.0 / (points - 1))
        logger.info(f"Mesh {points}x{points}: relative L2 error {errors[-1]:.6e}")

    slope = fit_convergence_slope(dx, errors)
    table = ConvergenceTable(meshes=list(meshes), dx=dx, errors=errors, slope=slope)
    if write_files:
        out_dir = results_io.ensure_dir(os.path.join(get_settings().output_dir
                                                     or base_config.output_dir, "convergence"))
        rows = [[m, d, e, slope] for m, d, e in zip(meshes, dx, errors)]
        table.path = results_io.write_csv(os.path.join(out_dir, f"{base_config.model}.csv"),
                                          ("mesh", "dx", "error", "slope"), rows)
    logger.info(f"Convergence slope {slope:.3f} in {time.time() - start:.2f} seconds")
    return table


def nf_sweep(base_config: RunConfig, nf_list: Sequence[int],
             write_files: bool = True) -> SweepTable:
    if not nf_list:
        raise ConfigurationError("N_f sweep needs at least one truncation order")

    cache = UniversalIntegralCache()
    errors = []
    for n_f in nf_list:
        config = base_config.model_copy(update={"n_fourier": int(n_f)})
        errors.append(_run_error(config, cache))
        logger.info(f"N_f={n_f}: relative L2 error {errors[-1]:.6e}")

    table = SweepTable(n_fourier=[int(n) for n in nf_list], errors=errors)
    if write_files:
        out_dir = results_io.ensure_dir(os.path.join(get_settings().output_dir
                                                     or base_config.output_dir, "nf_sweep"))
        table.path = results_io.write_csv(
            os.path.join(out_dir, f"{base_config.run_name}.csv"), ("nf", "error"),
            [[n, e] for n, e in zip(table.n_fourier, errors)])
    return table


def integrate_demo(m: float, c: float, n_index_qubits: int, m_eval_qubits: int,
                   backend: Backend = "circuit", b_min: float = 0.0, b_max: float = 1.0,
                   grid: GridKind = "endpoint", csv_path: Optional[str] = None) -> IntegralDemo:
    integrand = SinSqIntegrand(m=m, c=c, b_min=b_min, b_max=b_max)
    analytic = estimate_integral(integrand, n_index_qubits, m_eval_qubits, "analytic", grid)
    circuit = None
    if backend == "circuit":
        circuit = estimate_integral(integrand, n_index_qubits, m_eval_qubits, "circuit", grid)
    elif backend != "analytic":
        raise ValueError(f"Unknown backend {backend!r}")

    demo = IntegralDemo(m=m, c=c, closed_form=integrand.closed_form(), analytic=analytic,
                        circuit=circuit, bound=(b_max - b_min) * qae_error_bound(m_eval_qubits))

    print(f"Integral of sin^2({m:g} z + {c:g}) over [{b_min:g}, {b_max:g}]")
    print(f"  closed form : {demo.closed_form:.10f}")
    print(f"  analytic    : {demo.analytic:.10f}  (Riemann mean, {2 ** n_index_qubits} points)")
    if circuit is not None:
        print(f"  circuit     : {demo.circuit:.10f}  (QAE, {m_eval_qubits} evaluation qubits)")
    print(f"  QAE bound   : {demo.bound:.6f}")

    if csv_path is None:
        csv_path = os.path.join(get_settings().output_dir or "results", "integrals.csv")
    row = [m, c, demo.closed_form, demo.analytic,
           demo.circuit if demo.circuit is not None else math.nan, demo.bound]
    demo.path = results_io.append_csv_row(
        csv_path, ("m", "c", "closed_form", "analytic", "circuit", "bound"), row)
    return demo
