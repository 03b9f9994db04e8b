import os
import sys

import pytest

# Add the project root directory to Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
os.environ.setdefault("QFODE_LOG_FILE", "")

from qfode.experiments import RunConfig
from qfode.fourier_quadrature import FourierExtension, QuadratureConfig, UniversalIntegralCache
from qfode.pde_models import Mesh2D
from qfode.settings import get_settings


@pytest.fixture(autouse=True)
def fresh_settings():
    """Settings are cached per process; tests that set QFODE_* variables need a fresh read."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    """Sampler for property tests; QFODE_TEST_SEED overrides the run config seed."""
    seed = os.getenv("QFODE_TEST_SEED")
    config = RunConfig(total_time=1.0) if seed is None else RunConfig(total_time=1.0, seed=seed)
    return config.sampler()


@pytest.fixture
def small_mesh():
    return Mesh2D.square(11)


@pytest.fixture
def periodic_quad():
    """Analytic universal integrals on the period-1 extension."""
    return QuadratureConfig(backend="analytic", n_index_qubits=8, m_eval_qubits=8,
                            extension=FourierExtension.PERIODIC)


@pytest.fixture
def zero_padded_quad():
    return QuadratureConfig(backend="analytic", n_index_qubits=8, m_eval_qubits=8,
                            extension=FourierExtension.ZERO_PADDED)


@pytest.fixture
def cache():
    return UniversalIntegralCache()


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """Route every run output into a temporary directory."""
    monkeypatch.setenv("QFODE_OUTPUT_DIR", str(tmp_path))
    return tmp_path
