"""Small numerical toolkit shared by every model in the package.

All arithmetic is float64. Random draws come from numpy's ``PCG64`` bit
generator (``numpy.random.Generator``), seeded with a 64-bit integer, which
produces the same stream on every platform numpy supports.
"""
import numpy as np

#: clamp used before every logarithm of a probability
EPS = 1e-12


class DimensionError(ValueError):
    """Raised when array shapes do not chain."""


def make_rng(seed):
    """Return a ``numpy.random.Generator`` backed by PCG64 for ``seed``."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def sigmoid(x):
    """Logistic function, written through ``tanh`` so it never overflows and
    ``sigmoid(x) + sigmoid(-x) == 1`` up to one rounding."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def log_sigmoid(x):
    """``log(sigmoid(x))`` without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return -np.logaddexp(0.0, -x)


def clamp_prob(p):
    return np.clip(np.asarray(p, dtype=np.float64), EPS, 1.0 - EPS)


def cross_entropy_loss(pred, target):
    """Binary cross-entropy summed over all entries.

    Probabilities are clamped to ``[EPS, 1 - EPS]`` before the logs.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"pred shape {pred.shape} != target shape {target.shape}")
    p = clamp_prob(pred)
    return float(-np.sum(target * np.log(p) + (1.0 - target) * np.log1p(-p)))


def finite_difference_gradient(loss_fn, params, eps=1e-5):
    """Central-difference gradient of a scalar function of a flat vector.

    Parameters
    ----------
    loss_fn : callable
        Deterministic function of a 1-d float array returning a float.
    params : array_like
        Point at which to differentiate.
    eps : float
        Step size; must be positive.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    theta = np.array(params, dtype=np.float64).ravel()
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + eps
        f_plus = loss_fn(theta.copy())
        theta[i] = orig - eps
        f_minus = loss_fn(theta.copy())
        theta[i] = orig
        grad[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def relative_error(a, b, floor=1e-8):
    """Max elementwise ``|a - b| / max(|a|, |b|, floor)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / denom))


def gaussian_init(rng, shape, std=0.01):
    """Zero-mean Gaussian weights (default standard deviation 0.01)."""
    return rng.normal(0.0, std, size=shape)


def flatten_arrays(arrays):
    """Concatenate a list of arrays into one flat vector."""
    if not arrays:
        return np.zeros(0)
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays])


def unflatten_like(flat, templates):
    """Split ``flat`` into arrays shaped like ``templates``."""
    out = []
    pos = 0
    for t in templates:
        n = int(np.prod(np.shape(t)))
        out.append(np.asarray(flat[pos:pos + n], dtype=np.float64).reshape(np.shape(t)))
        pos += n
    if pos != len(flat):
        raise DimensionError(f"flat vector has {len(flat)} entries, expected {pos}")
    return out


class Momentum:
    """Classical momentum SGD over a list of parameter arrays (updated in place)."""

    def __init__(self, params, lr, momentum=0.9):
        if lr < 0:
            raise ValueError("learning rate must be non-negative")
        self.params = params
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, grads):
        for p, v, g in zip(self.params, self.velocity, grads):
            v *= self.momentum
            v -= self.lr * g
            p += v
