import contextlib

import numpy as np
import pytest

_CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record an acceptance criterion's outcome for the terminal summary.

    The context manager yields a dict; a ``"detail"`` entry set inside the
    block is printed next to the verdict.
    """

    @contextlib.contextmanager
    def record(name: str):
        info: dict[str, str] = {}
        try:
            yield info
        except BaseException as exc:
            detail = f"{type(exc).__name__}: {exc}".splitlines()[0]
            if "detail" in info:
                detail = f"{info['detail']}; {detail}"
            _CRITERIA.append((name, False, detail))
            raise
        _CRITERIA.append((name, True, info.get("detail", "")))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}"
        if detail:
            line += f"  ({detail[:160]})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20071127)
