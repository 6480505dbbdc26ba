import numpy as np
import pytest

from hybridscribe import kernels
from hybridscribe.lm import GenRnn, MarginalPrior, RnnNade
from hybridscribe.numeric import make_rng

BACKEND_NAMES = sorted(kernels.backends())


@pytest.fixture(params=BACKEND_NAMES)
def backend(request, monkeypatch):
    """Route every kernel call through one backend for the duration of a test."""
    mod = kernels.backends()[request.param]
    for name in kernels.KERNEL_NAMES:
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return request.param


def random_lm(rng, n, kind=None, hidden=5, nade_hidden=4, std=1.0):
    """Small language model with non-trivial weights and biases."""
    kind = kind or ("nade" if rng.random() < 0.5 else "rnn")
    if kind == "nade":
        lm = RnnNade.init(n, hidden, nade_hidden, rng, std)
    else:
        lm = GenRnn.init(n, hidden, rng, std)
    for k in lm.param_names:
        if lm.p[k].ndim == 1:
            lm.p[k][...] = rng.normal(0.0, std, lm.p[k].shape)
    lm._refresh()
    return lm


def random_instance(seed, n=3, T=4, kind=None):
    rng = make_rng(seed)
    lm = random_lm(rng, n, kind)
    post = rng.uniform(0.02, 0.98, (T, n))
    prior = MarginalPrior(rng.uniform(0.1, 0.9, n))
    return post, lm, prior


@pytest.fixture
def rng():
    return make_rng(1234)


def assert_same_float(a, b):
    assert np.float64(a).tobytes() == np.float64(b).tobytes(), (a, b)


# -- acceptance report -----------------------------------------------------------------

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion, reported "
                                       "as one PASS/FAIL line in the terminal summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed or rep.skipped):
        return
    status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    _CRITERIA.append((status, mark.args[0], detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for status, name, detail in _CRITERIA:
        terminalreporter.write_line(f"{status}  {name}" + (f"  [{detail}]" if detail else ""))
