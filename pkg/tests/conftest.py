import pytest

_CRITERIA = []


class CriterionRecorder:
    """Collects one pass/fail line per acceptance criterion for the terminal summary."""

    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        if exc_type is not None and not self.detail:
            self.detail = f"{exc_type.__name__}: {exc}".splitlines()[0][:160]
        _CRITERIA.append((self.number, status, self.title, self.detail))
        return False


@pytest.fixture
def criterion():
    return CriterionRecorder


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, detail in sorted(_CRITERIA):
        terminalreporter.write_line(f"[{status}] {number}. {title}" + (f" -- {detail}" if detail else ""))
