import numpy as np
import pytest

from vmbspec.collision import assemble
from vmbspec.velocity import build_grid

# criterion number -> (passed, detail); printed at the end of the session
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def cm12():
    return assemble(build_grid(12))


@pytest.fixture(scope="session")
def cm16():
    return assemble(build_grid(16))


@pytest.fixture(scope="session")
def cm8():
    return assemble(build_grid(8))


@pytest.fixture(scope="session")
def cm6():
    return assemble(build_grid(6))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(str(k).split("_")[0]), str(k))):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
