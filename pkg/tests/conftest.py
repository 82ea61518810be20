import pytest
from hypothesis import HealthCheck, settings

from nct.ifs import load_spec

settings.register_profile("nct", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("nct")


@pytest.fixture(scope="session")
def affine():
    return load_spec("affine-test")


@pytest.fixture(scope="session")
def ex_a():
    return load_spec("example-a")


@pytest.fixture(scope="session")
def ex_b():
    return load_spec("example-b")


@pytest.fixture(scope="session")
def flat():
    """A system with ``g'_x = 0`` and ``g`` independent of ``x``."""
    from nct.ifs import SystemSpec, TriangularMap

    return SystemSpec([
        TriangularMap.from_text("0.3*x+t1", "0.4*y+t2"),
        TriangularMap.from_text("0.3*x+0.6+t1", "0.4*y+0.5+t2"),
    ], name="flat")


_ACCEPTANCE: list = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion; lines are repeated in the terminal summary."""

    def emit(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
