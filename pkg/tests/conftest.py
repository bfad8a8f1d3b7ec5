import sys

import pytest

from crlflood import kernels


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    monkeypatch.setattr(kernels, "impl", kernels.backends()[request.param])
    return request.param


def pytest_terminal_summary(terminalreporter):
    # acceptance checks record one line each; show them after the run
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
