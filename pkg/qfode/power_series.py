"""Truncated power-series helpers shared by the models and the Taylor stepper.

A series is an array whose leading axis is the coefficient index; any trailing
axes (components, grid points) are carried along elementwise.
"""
import numpy as np
from numpy.polynomial.polynomial import polyval


def cauchy_term(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """Coefficient q of the product series a(t) * b(t)."""
    return np.einsum("l...,l...->...", a[:q + 1], b[q::-1])


def constant_term(value, q: int, like: np.ndarray) -> np.ndarray:
    """Coefficient q of a constant series: the value at q=0, zero otherwise."""
    if q == 0:
        return np.broadcast_to(np.asarray(value, dtype=float), like.shape).copy()
    return np.zeros_like(like, dtype=float)


def rescale(coefficients: np.ndarray, step: float) -> np.ndarray:
    """Series in t to series in z for t = step * z."""
    powers = step ** np.arange(coefficients.shape[0], dtype=float)
    return coefficients * powers.reshape((-1,) + (1,) * (coefficients.ndim - 1))


def pad(coefficients: np.ndarray, degree: int) -> np.ndarray:
    """Zero-extend (or cut) the series to hold coefficients 0..degree."""
    rows = degree + 1
    if coefficients.shape[0] >= rows:
        return coefficients[:rows].copy()
    extra = np.zeros((rows - coefficients.shape[0],) + coefficients.shape[1:])
    return np.concatenate([coefficients, extra], axis=0)


def evaluate(coefficients: np.ndarray, x: float) -> np.ndarray:
    """Value at a scalar point, keeping trailing axes."""
    return np.asarray(polyval(x, coefficients), dtype=float)
