"""Neural autoregressive density estimation over binary vectors.

Visible units are visited in ascending index order (ascending MIDI pitch).
With encoding weights ``W`` (D, H), decoding weights ``V`` (D, H), visible
biases ``b`` (D,) and hidden biases ``c`` (H,)::

    a_1 = c,  a_{i+1} = a_i + W[i] * v_i
    p(v_i = 1 | v_<i) = sigmoid(b_i + V[i] . sigmoid(a_i))
"""
import numpy as np

from . import kernels
from .numeric import log_sigmoid, sigmoid

# (rows * D * H) elements processed per chunk in the vectorized training path
_CHUNK_ELEMS = 1 << 21


def nade_logprob(W, V, b, c, v):
    """Exact log-density of one binary vector ``v``."""
    v = np.asarray(v).reshape(1, -1)
    return float(kernels.nade_logprob_rows(W, V, np.atleast_2d(b), np.atleast_2d(c), v)[0])


def nade_sample(W, V, b, c, rng):
    """Ancestral sample, one unit at a time in index order."""
    D = W.shape[0]
    a = np.array(c, dtype=np.float64)
    out = np.zeros(D, dtype=np.uint8)
    for i in range(D):
        p = sigmoid(b[i] + V[i] @ sigmoid(a))
        if rng.random() < p:
            out[i] = 1
            a += W[i]
    return out


def _chunk_rows(n_rows, D, H):
    return max(1, _CHUNK_ELEMS // max(1, D * H))


def nade_nll_grad(W, V, BV, C, X):
    """Negative log-likelihood of each row and its gradients.

    Parameters
    ----------
    W, V : ndarray (D, H)
    BV : ndarray (B, D)
        Per-row visible biases.
    C : ndarray (B, H)
        Per-row hidden biases.
    X : ndarray (B, D)
        Binary data rows.

    Returns
    -------
    nll : ndarray (B,)
    dW, dV : ndarray (D, H)
    dBV : ndarray (B, D)
    dC : ndarray (B, H)
    """
    X = np.asarray(X, dtype=np.float64)
    B, D = X.shape
    H = W.shape[1]
    nll = np.empty(B)
    dW = np.zeros_like(W)
    dV = np.zeros_like(V)
    dBV = np.empty((B, D))
    dC = np.empty((B, H))
    step = _chunk_rows(B, D, H)
    for s in range(0, B, step):
        x = X[s:s + step]
        contrib = x[:, :, None] * W[None, :, :]
        acc = np.cumsum(contrib, axis=1) - contrib
        A = C[s:s + step, None, :] + acc
        Hs = sigmoid(A)
        logits = BV[s:s + step] + np.einsum("bdh,dh->bd", Hs, V)
        nll[s:s + step] = -(x * log_sigmoid(logits) + (1 - x) * log_sigmoid(-logits)).sum(axis=1)
        dlogit = sigmoid(logits) - x
        dBV[s:s + step] = dlogit
        dV += np.einsum("bd,bdh->dh", dlogit, Hs)
        dA = dlogit[:, :, None] * V[None, :, :] * Hs * (1.0 - Hs)
        dC[s:s + step] = dA.sum(axis=1)
        # sum over later units i > j of dA[:, i]
        tail = np.cumsum(dA[:, ::-1, :], axis=1)[:, ::-1, :] - dA
        dW += np.einsum("bd,bdh->dh", x, tail)
    return nll, dW, dV, dBV, dC
