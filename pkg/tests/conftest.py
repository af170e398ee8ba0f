"""
Pytest configuration and shared fixtures
This file is automatically loaded by pytest
"""
import pytest
import os
import sys
import json
from pathlib import Path

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from infoloss.core.loss_engine import QuadratureConfig
from infoloss.core.metrics import metrics
from infoloss.densities.base import NormalDensity, UniformDensity
from infoloss.functions.factory import catalog


def pytest_configure(config):
    """Configure pytest with custom settings"""
    config.addinivalue_line("markers", "unit: Unit tests")
    config.addinivalue_line("markers", "integration: Integration tests")
    config.addinivalue_line("markers", "slow: Slow running tests")
    config.addinivalue_line("markers", "smoke: Smoke tests")


def pytest_collection_modifyitems(config, items):
    """Modify test collection to add markers automatically"""
    for item in items:
        # Auto-mark tests based on location
        if "unit" in str(item.fspath):
            item.add_marker(pytest.mark.unit)
        elif "integration" in str(item.fspath):
            item.add_marker(pytest.mark.integration)


# ============================================================================
# Environment
# ============================================================================

@pytest.fixture(autouse=True)
def setup_test_env():
    """Isolate INFOLOSS_* variables and metrics per test"""
    original_env = dict(os.environ)
    os.environ["INFOLOSS_LOG_LEVEL"] = "DEBUG"
    metrics.reset()

    yield

    os.environ.clear()
    os.environ.update(original_env)


@pytest.fixture(autouse=True)
def configure_test_logging(caplog):
    """Configure logging for tests"""
    import logging
    caplog.set_level(logging.DEBUG)


# ============================================================================
# Shared Fixtures
# ============================================================================

@pytest.fixture
def qcfg():
    """Quadrature config tighter than the defaults, single-threaded"""
    return QuadratureConfig(abs_tol=1e-6, rel_tol=1e-10, workers=1)


@pytest.fixture
def std_normal():
    return NormalDensity(0.0, 1.0)


@pytest.fixture
def unit_uniform():
    """Uniform on [-1, 1]"""
    return UniformDensity(-1.0, 1.0)


@pytest.fixture
def magnitude():
    return catalog("magnitude")


@pytest.fixture
def sqlin():
    return catalog("sqlin")


@pytest.fixture
def cubic():
    return catalog("cubic", c=100.0)


@pytest.fixture
def write_config(tmp_path):
    """Write a config mapping to a JSON file and return its path"""
    def _write(data, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)
    return _write
