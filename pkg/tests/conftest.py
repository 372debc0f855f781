import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from jconvex.polyfield import PolyField
from jconvex.structure import StructureField

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def standard2():
    return StructureField.standard(2)


@pytest.fixture
def norm2():
    return PolyField.norm_squared(2)


def zbar_linear(coeff=0.1, i=0, j=1, k=0, n=2):
    """Structure with the single entry ``Q_ij = coeff * zbar_k``."""
    return StructureField.from_entries(n, {(i, j): coeff * PolyField.zbar(n, k)})


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = []


def record_criterion(number, title, checks):
    """Store and print a pass/fail line; ``checks`` maps labels to booleans."""
    ok = all(bool(v) for v in checks.values())
    failed = [k for k, v in checks.items() if not v]
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
    if failed:
        line += "  (failed: " + ", ".join(failed) + ")"
    ACCEPTANCE.append((number, line))
    print(line)
    return ok, failed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
