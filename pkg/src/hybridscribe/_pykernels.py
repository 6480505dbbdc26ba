"""Pure-numpy implementations of the decoding hot loops.

Every function computes each output row with arithmetic that does not depend
on how many rows are in the batch, so scoring one hypothesis alone or inside a
batch gives bit-identical results.
"""
import numpy as np


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


_CHUNK_ELEMS = 1 << 20


def affine_rows(X, W, b):
    """``out[r, m] = b[m] + sum_k X[r, k] * W[m, k]``."""
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    out = np.empty((X.shape[0], W.shape[0]))
    step = max(1, _CHUNK_ELEMS // max(1, W.size))
    for s in range(0, X.shape[0], step):
        out[s:s + step] = (X[s:s + step, None, :] * W[None, :, :]).sum(axis=2)
    out += b
    return out


def sigmoid_affine_rows(X, W, b):
    return _sigmoid(affine_rows(X, W, b))


def bernoulli_logprob_rows(logp1, logp0, Z):
    """Log-probability of each binary row of ``Z`` under independent bits."""
    return np.where(np.asarray(Z) > 0, logp1, logp0).sum(axis=1)


def nade_logprob_rows(W, V, bv, c, Z):
    """NADE log-density of each row of ``Z`` given per-row biases.

    ``W`` and ``V`` are (D, H); ``bv`` is (B, D); ``c`` is (B, H).
    """
    W = np.asarray(W, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    on = np.asarray(Z) > 0
    a = np.array(c, dtype=np.float64)
    lp = np.zeros(on.shape[0])
    for i in range(on.shape[1]):
        logit = bv[:, i] + (_sigmoid(a) * V[i]).sum(axis=1)
        lp += _log_sigmoid(np.where(on[:, i], logit, -logit))
        a[on[:, i]] += W[i]
    return lp


def viterbi_binary(emit, log_trans, log_init):
    """Independent two-state Viterbi for each column.

    Parameters
    ----------
    emit : ndarray, shape (T, N, 2)
        Log emission scores for states off (0) and on (1).
    log_trans : ndarray, shape (N, 2, 2)
        ``log_trans[j, a, b]`` is the log-probability of moving a -> b.
    log_init : ndarray, shape (N, 2)

    Returns
    -------
    path : ndarray of int8, shape (T, N)
        Ties prefer state 1, both between predecessors and at the final frame.
    """
    T, N, _ = emit.shape
    path = np.zeros((T, N), dtype=np.int8)
    if T == 0:
        return path
    back = np.zeros((T, N, 2), dtype=np.int8)
    delta = log_init + emit[0]
    for t in range(1, T):
        new = np.empty_like(delta)
        for s in (0, 1):
            from_off = delta[:, 0] + log_trans[:, 0, s]
            from_on = delta[:, 1] + log_trans[:, 1, s]
            pick_on = from_on >= from_off
            back[t, :, s] = pick_on
            new[:, s] = np.where(pick_on, from_on, from_off) + emit[t, :, s]
        delta = new
    state = (delta[:, 1] >= delta[:, 0]).astype(np.int8)
    path[T - 1] = state
    cols = np.arange(N)
    for t in range(T - 1, 0, -1):
        state = back[t, cols, state]
        path[t - 1] = state
    return path
