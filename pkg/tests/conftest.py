import contextlib

import pytest

_ACCEPTANCE = {}


class Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.details = []

    def note(self, text):
        self.details.append(str(text))


@pytest.fixture
def criterion():
    @contextlib.contextmanager
    def open_criterion(number, title):
        c = Criterion(number, title)
        try:
            yield c
        except BaseException as exc:
            _ACCEPTANCE[number] = (title, False, c.details + [f"{type(exc).__name__}: {exc}".splitlines()[0]])
            raise
        _ACCEPTANCE[number] = (title, True, c.details)
    return open_criterion


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok, details = _ACCEPTANCE[number]
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}"
        if details:
            line += " :: " + "; ".join(details)
        terminalreporter.write_line(line)
