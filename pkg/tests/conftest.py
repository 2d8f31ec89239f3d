import pytest

from whitepet import _accel

ACCEPTANCE = {}


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run a test once with the compiled kernels and once with numpy."""
    if request.param == "numpy":
        monkeypatch.setenv(_accel.DISABLE_ENV, "1")
    else:
        monkeypatch.delenv(_accel.DISABLE_ENV, raising=False)
    return request.param


@pytest.fixture
def report():
    """Record one summary line per acceptance criterion."""

    def record(number, title, passed, detail):
        ACCEPTANCE[number] = (title, passed, detail)
        print(f"criterion {number} ({title}): {'PASS' if passed else 'FAIL'}; {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number} ({title}): {'PASS' if passed else 'FAIL'}; {detail}")
