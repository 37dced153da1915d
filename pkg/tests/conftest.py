import numpy as np
import pytest

from pointfoot.model import load_model


@pytest.fixture(scope="session")
def planar():
    return load_model("hume_planar")


@pytest.fixture(scope="session")
def spatial():
    return load_model("hume_spatial")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


class _Criterion:
    def __init__(self, store, key, title):
        self.store, self.key, self.title = store, key, title
        self.details = []

    def note(self, text):
        self.details.append(text)

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        ok = kind is None
        if not ok:
            self.details.append(f"{kind.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        self.store[self.key] = (self.title, ok, "; ".join(self.details))
        return False


@pytest.fixture
def criterion(request):
    """Context manager recording a PASS/FAIL line for one acceptance criterion."""
    store = request.config.stash[_RESULTS]
    return lambda key, title: _Criterion(store, key, title)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        title, ok, detail = results[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key:>2}. {title}: {detail}")
