"""Finite-difference verification of every model's analytic gradient."""
import numpy as np

from .acoustic import Dnn, StackedRnn
from .lm import GenRnn, RnnNade
from .numeric import finite_difference_gradient, make_rng

GRAD_MODELS = ("dnn", "rnn", "gen-rnn", "nade")


def tensor_relative_error(analytic, numeric):
    """``||a - n|| / max(||a||, ||n||)`` for one parameter tensor (0 when both vanish)."""
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - n) / scale)


def _check(params, grads, loss, eps):
    """Max relative error over tensors; ``loss()`` reads the params in place."""
    worst = 0.0
    for p, g in zip(params, grads):
        flat = p.reshape(-1)
        orig = flat.copy()

        def f(theta):
            flat[:] = theta
            return loss()

        num = finite_difference_gradient(f, orig, eps)
        flat[:] = orig
        worst = max(worst, tensor_relative_error(g, num))
    return worst


def _binary(rng, shape):
    return (rng.random(shape) < 0.4).astype(np.float64)


def check_model(name, rng, eps=1e-5, std=0.5):
    """Build a small random instance of ``name`` and return the largest
    per-tensor relative gradient error."""
    n_in = int(rng.integers(2, 9))
    n_out = int(rng.integers(2, 6))
    T = int(rng.integers(2, 6))
    if name == "dnn":
        m = Dnn.init(n_in, n_out, tuple(rng.integers(2, 7, size=2)), rng, std)
        X, Y = rng.standard_normal((T, n_in)), _binary(rng, (T, n_out))
        _, g = m.nll_and_grad(X, Y)
        return _check(m.params(), g, lambda: m.nll_and_grad(X, Y)[0], eps)
    if name == "rnn":
        m = StackedRnn.init(n_in, n_out, tuple(rng.integers(2, 7, size=2)), rng, std)
        X, Y = rng.standard_normal((T, n_in)), _binary(rng, (T, n_out))
        _, g = m.nll_and_grad(X, Y)
        return _check(m.params(), g, lambda: m.nll_and_grad(X, Y)[0], eps)
    if name in ("gen-rnn", "nade"):
        H = int(rng.integers(2, 7))
        if name == "nade":
            m = RnnNade.init(n_out, H, int(rng.integers(2, 7)), rng, std)
        else:
            m = GenRnn.init(n_out, H, rng, std)
        for k in m.param_names:     # nonzero biases exercise every path
            m.p[k][...] = rng.normal(0.0, std, m.p[k].shape)
        m._refresh()
        Z = _binary(rng, (T, n_out))
        _, g = m.nll_and_grad(Z)

        def loss():
            m._refresh()
            return m.nll_and_grad(Z)[0]

        err = _check(m.params(), [g[k] for k in m.param_names], loss, eps)
        m._refresh()
        return err
    raise ValueError(f"unknown model {name!r}; choose from {GRAD_MODELS}")


def run_grad_checks(models=GRAD_MODELS, instances=5, seed=0):
    """``{model: max relative error over random instances}``."""
    rng = make_rng(seed)
    return {name: max(check_model(name, rng) for _ in range(instances)) for name in models}
