import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).resolve().parents[1] / "src" / "mpmimo" / "data"


def random_complex(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_passive(rng, n, max_norm=0.95):
    """Random contraction with spectral norm drawn uniformly in (0, max_norm)."""
    m = random_complex(rng, (n, n))
    return m / np.linalg.norm(m, 2) * rng.uniform(0.05, max_norm)


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS, key=lambda k: (int(k.split()[0][0]), k)):
        ok, detail = mod.RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
