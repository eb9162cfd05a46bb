import numpy as np
import pytest

from flexgfra.dictionary import PilotSet, build_dictionary

_ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_dictionary():
    """W=5 with pilot lengths [3, 4, 5]."""
    r = np.random.default_rng(7)
    pilots = []
    for t in (3, 4, 5):
        x = r.standard_normal(t) + 1j * r.standard_normal(t)
        pilots.append(x / np.linalg.norm(x))
    return build_dictionary(PilotSet(window=5, pilots=tuple(pilots)))


@pytest.fixture
def criterion(request):
    """Record a named acceptance criterion; reported in the terminal summary."""
    entry = {"name": request.node.name, "passed": False, "detail": ""}
    _ACCEPTANCE.append(entry)

    def record(name, passed, detail=""):
        entry.update(name=name, passed=bool(passed), detail=detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for e in _ACCEPTANCE:
        status = "PASS" if e["passed"] else "FAIL"
        terminalreporter.write_line(f"[{status}] {e['name']}: {e['detail']}")
