import pytest

from lpchmm.config import RunConfig
from lpchmm.synth import synth_corpus

# small front-end + model settings that keep unit tests fast
FAST = dict(codebook_size=16, n_states=3, max_iters=30)


@pytest.fixture(scope="session")
def small_corpus():
    return synth_corpus(seed=0, per_class=6, duration_s=0.3)


@pytest.fixture(scope="session")
def fast_config():
    return RunConfig(**FAST)


@pytest.fixture(scope="session")
def small_bank(small_corpus, fast_config):
    from lpchmm.recognizer import train_bank

    return train_bank([(u.clip, u.label, u.name) for u in small_corpus], fast_config, seed=0)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record the outcome line of an acceptance criterion: ``acceptance(number, ok, detail)``."""

    def record(number, ok, detail):
        _ACCEPTANCE[number] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
