from __future__ import annotations

import pytest

_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _acceptance_results.append((name, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, status in _acceptance_results:
        terminalreporter.write_line(f"[{status}] {name}")


@pytest.fixture
def mock_gen_cfg():
    from synthqa.gateway import GenBackendConfig

    return GenBackendConfig(kind="mock", seed=7)
