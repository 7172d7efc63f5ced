import numpy as np
import pytest

from rksurv.data import Dataset, Subject

_ACCEPTANCE: list[str] = []


@pytest.fixture
def record_criterion():
    """Record a one-line pass/fail verdict for the acceptance summary."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        verdict = "PASS" if passed else "FAIL"
        _ACCEPTANCE.append(f"criterion {number:>2} {verdict}  {title}" + (f"  [{detail}]" if detail else ""))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


def make_subject(sid, T, event, times=(0.0,), values=None, fixed=()):
    times = np.asarray(times, dtype=float)
    values = np.zeros((0, len(times))) if values is None else np.atleast_2d(np.asarray(values, dtype=float))
    return Subject(str(sid), float(T), bool(event), times, values, np.asarray(fixed, dtype=float))


def null_dataset(times, events) -> Dataset:
    return Dataset([make_subject(i, T, e) for i, (T, e) in enumerate(zip(times, events))], (), (), "")
