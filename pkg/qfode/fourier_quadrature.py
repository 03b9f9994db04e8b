"""
Fourier reduction of the per-step integral and the universal sin^2 integrals.

A driving polynomial p(z) on [0, 1] is extended beyond the interval, expanded
as c + sum_n a_n cos(n w z) + b_n sin(n w z), and integrated term by term with

    int_0^1 cos(n w z) dz = 1 - 2 U1(n),   U1(n) = int_0^1 sin^2(n w z / 2) dz
    int_0^1 sin(n w z) dz = 1 - 2 U2(n),   U2(n) = int_0^1 sin^2(pi/4 - n w z / 2) dz

so the only quantities left to estimate are U1 and U2, which do not depend on
the polynomial and are computed once per run.
"""
import math
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Tuple

import numpy as np
from pydantic import BaseModel, Field

from logger import setup_logger
from qfode.amplitude_estimation import Backend, GridKind, SinSqIntegrand, estimate_integral

logger = setup_logger(__name__)


class FourierExtension(str, Enum):
    # period 2, p on [0, 1), 0 on [1, 2)
    ZERO_PADDED = "zero_padded"
    # period 1, p repeated
    PERIODIC = "periodic"

    @property
    def period(self) -> float:
        return 2.0 if self is FourierExtension.ZERO_PADDED else 1.0

    @property
    def w(self) -> float:
        return 2 * math.pi / self.period

    def end_values(self, n: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Exact cos(n w) and sin(n w) at z = 1."""
        n = np.asarray(n)
        if self is FourierExtension.ZERO_PADDED:
            cos_end = np.where(n % 2 == 0, 1.0, -1.0)
        else:
            cos_end = np.ones(n.shape)
        return cos_end, np.zeros(n.shape)


class QuadratureConfig(BaseModel):
    backend: Backend = "analytic"
    n_index_qubits: int = Field(default=8, ge=1)
    m_eval_qubits: int = Field(default=8, ge=1)
    grid: GridKind = "endpoint"
    extension: FourierExtension = FourierExtension.ZERO_PADDED


@dataclass
class PolynomialInZ:
    """coefficients[p] multiplies z^p; trailing axes hold independent polynomials."""
    coefficients: np.ndarray

    def __post_init__(self):
        coefficients = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        # trim trailing zero rows, keep at least the constant row
        nonzero = np.flatnonzero(np.any(coefficients.reshape(coefficients.shape[0], -1) != 0,
                                        axis=1))
        last = int(nonzero[-1]) + 1 if nonzero.size else 1
        self.coefficients = coefficients[:last]

    @property
    def degree(self) -> int:
        return self.coefficients.shape[0] - 1

    def integral(self) -> np.ndarray:
        """Exact int_0^1 p(z) dz."""
        p = np.arange(self.coefficients.shape[0], dtype=float)
        return np.tensordot(1.0 / (p + 1), self.coefficients, axes=(0, 0))


@dataclass
class FourierSeries:
    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    w: float

    @property
    def n_f(self) -> int:
        return self.a.shape[0]

    def __add__(self, other: "FourierSeries") -> "FourierSeries":
        if self.w != other.w or self.n_f != other.n_f:
            raise ValueError("Cannot add series with different frequency or truncation")
        return FourierSeries(self.c + other.c, self.a + other.a, self.b + other.b, self.w)

    def evaluate(self, z: float) -> np.ndarray:
        n = np.arange(1, self.n_f + 1)
        cos_part = np.tensordot(np.cos(n * self.w * z), self.a, axes=(0, 0))
        sin_part = np.tensordot(np.sin(n * self.w * z), self.b, axes=(0, 0))
        return self.c + cos_part + sin_part


def moment_table(max_degree: int, n_f: int,
                 extension: FourierExtension = FourierExtension.ZERO_PADDED
                 ) -> Tuple[np.ndarray, np.ndarray]:
    """M_cos[p, n-1] = int_0^1 z^p cos(n w z) dz and the matching sine table."""
    m_cos = np.zeros((max_degree + 1, n_f))
    m_sin = np.zeros((max_degree + 1, n_f))
    if n_f == 0:
        return m_cos, m_sin

    n = np.arange(1, n_f + 1)
    k = n * extension.w
    cos_end, sin_end = extension.end_values(n)

    m_cos[0] = sin_end / k
    m_sin[0] = (1.0 - cos_end) / k
    for p in range(1, max_degree + 1):
        m_cos[p] = sin_end / k - (p / k) * m_sin[p - 1]
        m_sin[p] = -cos_end / k + (p / k) * m_cos[p - 1]
    return m_cos, m_sin


def trig_moments(max_degree: int, n: int,
                 extension: FourierExtension = FourierExtension.ZERO_PADDED
                 ) -> Tuple[np.ndarray, np.ndarray]:
    if n < 1:
        raise ValueError(f"Harmonic index must be at least 1, got {n}")
    m_cos, m_sin = moment_table(max_degree, n, extension)
    return m_cos[:, n - 1].copy(), m_sin[:, n - 1].copy()


def half_range_fourier(poly: PolynomialInZ, n_f: int,
                       extension: FourierExtension = FourierExtension.ZERO_PADDED
                       ) -> FourierSeries:
    if n_f < 0:
        raise ValueError(f"Truncation order must be non-negative, got {n_f}")

    coefficients = poly.coefficients
    scale = 2.0 / extension.period
    m_cos, m_sin = moment_table(poly.degree, n_f, extension)

    c = poly.integral() / extension.period
    a = scale * np.tensordot(m_cos.T, coefficients, axes=(1, 0))
    b = scale * np.tensordot(m_sin.T, coefficients, axes=(1, 0))
    return FourierSeries(c=np.asarray(c, dtype=float), a=a, b=b, w=extension.w)


class UniversalIntegrals(BaseModel):
    u1: Tuple[float, ...]
    u2: Tuple[float, ...]

    def arrays(self, n_f: int) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.u1[:n_f], dtype=float), np.asarray(self.u2[:n_f], dtype=float)


CacheKey = Tuple[int, str, int, int, str, str]


class UniversalIntegralCache:
    """Write-once store of (U1(n), U2(n)) per harmonic and quadrature setting."""

    def __init__(self):
        self._entries: Dict[CacheKey, Tuple[float, float]] = {}
        self._lock = threading.Lock()
        self.evaluations = 0

    @staticmethod
    def key(n: int, config: QuadratureConfig) -> CacheKey:
        return (n, config.extension.value, config.n_index_qubits, config.m_eval_qubits,
                config.backend, config.grid)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: CacheKey) -> bool:
        return key in self._entries

    def get(self, n: int, config: QuadratureConfig) -> Tuple[float, float]:
        key = self.key(n, config)
        if key not in self._entries:
            raise KeyError(f"Universal integrals for n={n} not populated ({key})")
        return self._entries[key]

    def lookup(self, n_f: int, config: QuadratureConfig) -> UniversalIntegrals:
        pairs = [self.get(n, config) for n in range(1, n_f + 1)]
        return UniversalIntegrals(u1=tuple(p[0] for p in pairs), u2=tuple(p[1] for p in pairs))

    def _store(self, key: CacheKey, compute) -> Tuple[float, float]:
        with self._lock:
            if key not in self._entries:
                self._entries[key] = compute()
                self.evaluations += 1
            return self._entries[key]


def universal_integrands(n: int, extension: FourierExtension) -> Tuple[SinSqIntegrand,
                                                                        SinSqIntegrand]:
    half = n * extension.w / 2
    return SinSqIntegrand(m=half, c=0.0), SinSqIntegrand(m=-half, c=math.pi / 4)


def populate_universal_integrals(n_f: int, config: QuadratureConfig,
                                 cache: UniversalIntegralCache) -> UniversalIntegralCache:
    """Fill (U1(n), U2(n)) for n = 1..n_f; existing entries are left untouched."""
    start = time.time()
    before = cache.evaluations

    for n in range(1, n_f + 1):
        def compute(n=n):
            first, second = universal_integrands(n, config.extension)
            u1 = estimate_integral(first, config.n_index_qubits, config.m_eval_qubits,
                                   config.backend, config.grid)
            u2 = estimate_integral(second, config.n_index_qubits, config.m_eval_qubits,
                                   config.backend, config.grid)
            return float(u1), float(u2)

        cache._store(cache.key(n, config), compute)

    added = cache.evaluations - before
    if added:
        logger.info(f"Computed {added} universal integral pair(s) with the {config.backend} "
                    f"backend in {time.time() - start:.2f} seconds")
    return cache


def series_integral_weights(n_f: int, universal: UniversalIntegrals
                            ) -> Tuple[np.ndarray, np.ndarray]:
    """Weights of a_n and b_n in int_0^1 of the truncated series."""
    if len(universal.u1) < n_f or len(universal.u2) < n_f:
        raise KeyError(f"Universal integrals cover {len(universal.u1)} harmonics, "
                       f"need {n_f}; populate the cache first")
    u1, u2 = universal.arrays(n_f)
    return 1.0 - 2.0 * u1, 1.0 - 2.0 * u2


def integrate_series(series: FourierSeries, weights: Tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    weight_a, weight_b = weights
    return (series.c + np.tensordot(weight_a, series.a, axes=(0, 0))
            + np.tensordot(weight_b, series.b, axes=(0, 0)))


def assemble_update(y: np.ndarray, summed_series: FourierSeries, h_bar: float,
                    universal: UniversalIntegrals) -> np.ndarray:
    """
    y_{i+1} = y_i - sum_n 2 h_bar A_n U1(n) - sum_n 2 h_bar B_n U2(n)
              + h_bar sum_n (A_n + B_n) + h_bar C

    where A_n, B_n and C are the coefficients already summed over the
    sub-subintervals of the step.
    """
    y = np.asarray(y, dtype=float)
    if np.shape(summed_series.c) != y.shape:
        raise ValueError(f"Series components {np.shape(summed_series.c)} do not match the "
                         f"state shape {y.shape}")

    n_f = summed_series.n_f
    if n_f == 0:
        return y + h_bar * summed_series.c

    if len(universal.u1) < n_f:
        raise KeyError(f"Universal integrals cover {len(universal.u1)} harmonics, need {n_f}")
    u1, u2 = universal.arrays(n_f)
    a, b = summed_series.a, summed_series.b

    return (y
            - np.tensordot(2 * h_bar * u1, a, axes=(0, 0))
            - np.tensordot(2 * h_bar * u2, b, axes=(0, 0))
            + h_bar * (a.sum(axis=0) + b.sum(axis=0))
            + h_bar * summed_series.c)
