import pytest

_LINES = []


class AcceptanceRecorder:
    """Collects one verdict line per acceptance criterion."""

    def __call__(self, name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} {name}: {detail}"
        _LINES.append(line)
        print(line)
        return passed


@pytest.fixture
def record():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
