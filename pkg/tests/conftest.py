import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def report(request, capsys):
    """``report(criterion, passed, detail)`` prints one PASS/FAIL line and keeps it for the summary."""
    def _report(criterion, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}"
        request.config.stash[_LINES].append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed
    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
