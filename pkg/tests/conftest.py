import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def corpus():
    """Ten 20 s records per class at 250 Hz."""
    from ecgsvm.synth import gen_corpus

    return gen_corpus(10, seed=0, fs=250, duration_s=20.0)


@pytest.fixture(scope="session")
def clean_corpus(corpus):
    from ecgsvm.preprocess import condition

    return [condition(r) for r in corpus]


@pytest.fixture(scope="session")
def windows_2s(clean_corpus):
    """300 balanced 2 s windows and their rhythm labels."""
    from ecgsvm.experiment import prepare_windows

    return prepare_windows(clean_corpus, 2.0, "3way", seed=0, conditioned=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def _verdict(number, title, checks, detail=""):
        failed = [name for name, ok in checks.items() if not ok]
        status = "PASS" if not failed else "FAIL"
        line = f"criterion {number:>2} {status}  {title}"
        if detail:
            line += f"  [{detail}]"
        if failed:
            line += f"  failed: {', '.join(failed)}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert not failed, line

    def _skip(number, title, reason):
        line = f"criterion {number:>2} SKIP  {title}  [{reason}]"
        ACCEPTANCE_LINES.append(line)
        pytest.skip(reason)

    _verdict.skip = _skip
    return _verdict


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
