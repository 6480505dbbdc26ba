"""Music language models over piano-roll frames.

Both models share the recurrence of a generative Elman RNN.  The hidden state
that predicts frame ``z_t`` summarizes ``z_1 .. z_{t-1}``; it starts at the
zero vector and is updated after each frame by::

    h <- sigmoid(W_zh z_t + W_hh h + b_h)

:class:`GenRnn` reads independent per-pitch probabilities
``sigmoid(W_hz h + b_z)`` from it.  :class:`RnnNade` instead conditions a NADE
on it through affine bias maps ``b_v(h) = b_v + U_v h`` and
``c(h) = c + U_c h``, so notes inside a frame are modeled jointly.

Inference (``step_logprob``, ``advance`` and their batched forms) goes through
the row kernels in :mod:`hybridscribe.kernels`, so a hypothesis scores the same
whether it is evaluated alone or in a batch.  Training uses plain numpy.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .nade import nade_nll_grad, nade_sample
from .numeric import (DimensionError, EPS, Momentum, gaussian_init, log_sigmoid,
                      make_rng, sigmoid)


@dataclass(frozen=True)
class LmState:
    """History summary for one decoding hypothesis. Treat as immutable."""

    h: np.ndarray
    t: int = 0


class _RecurrentLM:
    kind = None
    param_names = ()

    def __init__(self, params):
        self.p = {k: np.array(params[k], dtype=np.float64) for k in self.param_names}
        self._check()
        self._refresh()

    # -- parameter plumbing -------------------------------------------------
    @property
    def n_pitches(self):
        return self.p["W_zh"].shape[1]

    @property
    def hidden_size(self):
        return self.p["W_hh"].shape[0]

    def params(self):
        return [self.p[k] for k in self.param_names]

    def _check(self):
        H, N = self.p["W_zh"].shape
        if self.p["W_hh"].shape != (H, H) or self.p["b_h"].shape != (H,):
            raise DimensionError("recurrent weights do not chain")

    def _refresh(self):
        """Rebuild inference caches after parameters change."""
        self._W_in = np.ascontiguousarray(np.hstack([self.p["W_zh"], self.p["W_hh"]]))

    def copy(self):
        return type(self)(self.p)

    # -- inference ------------------------------------------------------------
    def init_state(self):
        return LmState(np.zeros(self.hidden_size), 0)

    def advance_batch(self, Hs, Z):
        """New hidden rows after consuming frames ``Z`` from states ``Hs``."""
        X = np.hstack([np.asarray(Z, dtype=np.float64), np.asarray(Hs, dtype=np.float64)])
        return kernels.sigmoid_affine_rows(X, self._W_in, self.p["b_h"])

    def advance(self, state, z):
        z = self._as_frame(z)
        h = self.advance_batch(state.h[None, :], z[None, :])[0]
        return LmState(h, state.t + 1)

    def step_logprob(self, state, z):
        """``log P(z | history)``; does not change ``state``."""
        z = self._as_frame(z)
        cond = self.condition(state.h[None, :])
        return float(self.logprob_rows(cond, np.zeros(1, dtype=np.intp), z[None, :])[0])

    def sequence_logprob(self, frames):
        """``sum_t log P(z_t | z_<t)`` for a (T, N) binary array."""
        frames = np.asarray(frames)
        state = self.init_state()
        total = 0.0
        for z in frames:
            total += self.step_logprob(state, z)
            state = self.advance(state, z)
        return total

    def _as_frame(self, z):
        z = np.asarray(z).ravel()
        if z.shape[0] != self.n_pitches:
            raise DimensionError(f"frame has {z.shape[0]} pitches, model expects {self.n_pitches}")
        return z

    # -- training --------------------------------------------------------------
    def hidden_sequence(self, Z):
        """Teacher-forced states: row ``t`` is the state that predicts ``Z[t]``."""
        T = Z.shape[0]
        Hs = np.zeros((T + 1, self.hidden_size))
        U = Z @ self.p["W_zh"].T + self.p["b_h"]
        for t in range(T):
            Hs[t + 1] = sigmoid(U[t] + self.p["W_hh"] @ Hs[t])
        return Hs

    def _recurrent_backward(self, Z, Hs, dHprev, grads):
        """Back-propagate ``dHprev`` (gradient w.r.t. Hs[:T]) through time."""
        T = Z.shape[0]
        W_hh = self.p["W_hh"]
        dh = np.zeros(self.hidden_size)
        for t in range(T - 1, 0, -1):
            dh = dh + dHprev[t]
            h = Hs[t]
            da = dh * h * (1.0 - h)
            grads["W_zh"] += np.outer(da, Z[t - 1])
            grads["W_hh"] += np.outer(da, Hs[t - 1])
            grads["b_h"] += da
            dh = W_hh.T @ da

    def nll_and_grad(self, Z):
        """Total negative log-likelihood of one (T, N) sequence and its gradient."""
        raise NotImplementedError

    def batch_nll_and_grad(self, seqs):
        grads = {k: np.zeros_like(v) for k, v in self.p.items()}
        total = 0.0
        for Z in seqs:
            nll, g = self.nll_and_grad(np.asarray(Z, dtype=np.float64))
            total += nll
            for k in grads:
                grads[k] += g[k]
        return total, grads


class GenRnn(_RecurrentLM):
    """Generative RNN with independent sigmoid outputs per pitch."""

    kind = "rnn"
    param_names = ("W_zh", "W_hh", "b_h", "W_hz", "b_z")

    @classmethod
    def init(cls, n_pitches, hidden=100, rng=None, std=0.01):
        rng = rng if rng is not None else make_rng(0)
        return cls({
            "W_zh": gaussian_init(rng, (hidden, n_pitches), std),
            "W_hh": gaussian_init(rng, (hidden, hidden), std),
            "b_h": np.zeros(hidden),
            "W_hz": gaussian_init(rng, (n_pitches, hidden), std),
            "b_z": np.zeros(n_pitches),
        })

    def _check(self):
        super()._check()
        H, N = self.p["W_zh"].shape
        if self.p["W_hz"].shape != (N, H) or self.p["b_z"].shape != (N,):
            raise DimensionError("output weights do not chain")

    def condition(self, Hs):
        return kernels.affine_rows(np.asarray(Hs, dtype=np.float64), self.p["W_hz"], self.p["b_z"])

    def logprob_rows(self, cond, rows, Z):
        logits = cond[rows]
        on = np.asarray(Z) > 0
        return log_sigmoid(np.where(on, logits, -logits)).sum(axis=1)

    def output_probs(self, state):
        return sigmoid(self.condition(state.h[None, :])[0])

    def nll_and_grad(self, Z):
        Hs = self.hidden_sequence(Z)
        Hprev = Hs[:-1]
        logits = Hprev @ self.p["W_hz"].T + self.p["b_z"]
        nll = -float((Z * log_sigmoid(logits) + (1 - Z) * log_sigmoid(-logits)).sum())
        dlogit = sigmoid(logits) - Z
        g = {k: np.zeros_like(v) for k, v in self.p.items()}
        g["W_hz"] = dlogit.T @ Hprev
        g["b_z"] = dlogit.sum(axis=0)
        dHprev = dlogit @ self.p["W_hz"]
        self._recurrent_backward(Z, Hs, dHprev, g)
        return nll, g


class RnnNade(_RecurrentLM):
    """RNN whose hidden state sets the biases of a per-frame NADE."""

    kind = "nade"
    param_names = ("W_zh", "W_hh", "b_h", "W", "V", "b_v", "c", "U_v", "U_c")

    @classmethod
    def init(cls, n_pitches, hidden=100, nade_hidden=150, rng=None, std=0.01):
        rng = rng if rng is not None else make_rng(0)
        D, H, K = n_pitches, hidden, nade_hidden
        return cls({
            "W_zh": gaussian_init(rng, (H, D), std),
            "W_hh": gaussian_init(rng, (H, H), std),
            "b_h": np.zeros(H),
            "W": gaussian_init(rng, (D, K), std),
            "V": gaussian_init(rng, (D, K), std),
            "b_v": np.zeros(D),
            "c": np.zeros(K),
            "U_v": gaussian_init(rng, (D, H), std),
            "U_c": gaussian_init(rng, (K, H), std),
        })

    @property
    def nade_hidden(self):
        return self.p["W"].shape[1]

    def _check(self):
        super()._check()
        H, D = self.p["W_zh"].shape
        K = self.p["W"].shape[1]
        shapes = {"W": (D, K), "V": (D, K), "b_v": (D,), "c": (K,), "U_v": (D, H), "U_c": (K, H)}
        for k, s in shapes.items():
            if self.p[k].shape != s:
                raise DimensionError(f"{k} has shape {self.p[k].shape}, expected {s}")

    def _refresh(self):
        super()._refresh()
        self._W = np.ascontiguousarray(self.p["W"])
        self._V = np.ascontiguousarray(self.p["V"])

    def condition(self, Hs):
        Hs = np.asarray(Hs, dtype=np.float64)
        return (kernels.affine_rows(Hs, self.p["U_v"], self.p["b_v"]),
                kernels.affine_rows(Hs, self.p["U_c"], self.p["c"]))

    def logprob_rows(self, cond, rows, Z):
        bv, c = cond
        return kernels.nade_logprob_rows(self._W, self._V, bv[rows], c[rows], Z)

    def sample(self, state, rng):
        bv, c = self.condition(state.h[None, :])
        return nade_sample(self.p["W"], self.p["V"], bv[0], c[0], rng)

    def nll_and_grad(self, Z):
        Hs = self.hidden_sequence(Z)
        Hprev = Hs[:-1]
        BV = Hprev @ self.p["U_v"].T + self.p["b_v"]
        C = Hprev @ self.p["U_c"].T + self.p["c"]
        nll, dW, dV, dBV, dC = nade_nll_grad(self.p["W"], self.p["V"], BV, C, Z)
        g = {k: np.zeros_like(v) for k, v in self.p.items()}
        g["W"], g["V"] = dW, dV
        g["b_v"] = dBV.sum(axis=0)
        g["c"] = dC.sum(axis=0)
        g["U_v"] = dBV.T @ Hprev
        g["U_c"] = dC.T @ Hprev
        dHprev = dBV @ self.p["U_v"] + dC @ self.p["U_c"]
        self._recurrent_backward(Z, Hs, dHprev, g)
        return float(nll.sum()), g


LM_KINDS = {"rnn": GenRnn, "nade": RnnNade}


# -- marginal prior ---------------------------------------------------------------

@dataclass(frozen=True)
class MarginalPrior:
    """Factorized per-pitch prior ``P(z) = prod_j pi_j^z_j (1 - pi_j)^(1 - z_j)``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if np.any(p <= 0) or np.any(p >= 1):
            raise ValueError("prior probabilities must lie strictly inside (0, 1)")
        object.__setattr__(self, "probs", p)

    @property
    def n_pitches(self):
        return self.probs.shape[0]

    @property
    def log_on(self):
        return np.log(self.probs)

    @property
    def log_off(self):
        return np.log1p(-self.probs)

    def logprob(self, z):
        z = np.asarray(z).reshape(1, -1)
        return float(kernels.bernoulli_logprob_rows(self.log_on, self.log_off, z)[0])

    @classmethod
    def uniform(cls, n_pitches):
        return cls(np.full(n_pitches, 0.5))


def fit_marginal_prior(rolls):
    """Add-one smoothed pitch frequencies: ``(active + 1) / (frames + 2)``."""
    mats = [np.asarray(getattr(r, "frames", r)) for r in rolls]
    mats = [m for m in mats if m.shape[0] > 0]
    if not mats:
        raise ValueError("cannot fit a prior on no frames")
    stacked = np.concatenate(mats, axis=0)
    counts = (stacked > 0).sum(axis=0)
    return MarginalPrior((counts + 1.0) / (stacked.shape[0] + 2.0))


# -- training -----------------------------------------------------------------------

@dataclass
class LmTrainConfig:
    lr: float = 0.05
    momentum: float = 0.9
    epochs: int = 200
    patience: int = 10
    seq_len: int = 200
    batch_size: int = 8
    seed: int = 0


class TrainingDivergedError(RuntimeError):
    pass


def subsequences(rolls, seq_len):
    out = []
    for r in rolls:
        Z = np.asarray(getattr(r, "frames", r), dtype=np.float64)
        for s in range(0, Z.shape[0], seq_len):
            chunk = Z[s:s + seq_len]
            if chunk.shape[0]:
                out.append(chunk)
    return out


def mean_frame_nll(model, seqs):
    frames = sum(len(s) for s in seqs)
    if frames == 0:
        return float("nan")
    return sum(model.nll_and_grad(s)[0] for s in seqs) / frames


def train_lm(model, train_rolls, valid_rolls=(), config=None):
    """Maximize ``sum_t log P(z_t | z_<t)`` by momentum SGD.

    Sequences are cut into subsequences of ``config.seq_len`` frames (each
    starting from the zero state), shuffled each epoch and grouped into
    minibatches of ``config.batch_size``.  The update uses the gradient of the
    mean per-frame negative log-likelihood.  With validation rolls, training
    stops after ``patience`` epochs without improvement and the best
    parameters are kept.

    Returns the trained model (a new object) and a list of
    ``(epoch, train_nll, valid_nll)`` per epoch.
    """
    config = config or LmTrainConfig()
    model = model.copy()
    rng = make_rng(config.seed)
    train = subsequences(train_rolls, config.seq_len)
    valid = subsequences(valid_rolls, config.seq_len)
    if not train:
        raise ValueError("no training frames")
    params = model.params()
    opt = Momentum(params, config.lr, config.momentum)
    trace = []
    best = (np.inf, [p.copy() for p in params])
    since_best = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train))
        total, frames = 0.0, 0
        for s in range(0, len(order), config.batch_size):
            batch = [train[i] for i in order[s:s + config.batch_size]]
            nll, grads = model.batch_nll_and_grad(batch)
            n = sum(len(b) for b in batch)
            if not np.isfinite(nll) or not all(np.isfinite(g).all() for g in grads.values()):
                raise TrainingDivergedError(f"language-model loss or gradient became non-finite "
                                            f"in epoch {epoch}")
            total += nll
            frames += n
            opt.step([grads[k] / n for k in model.param_names])
            model._refresh()
        train_nll = total / frames
        valid_nll = mean_frame_nll(model, valid) if valid else float("nan")
        trace.append((epoch, train_nll, valid_nll))
        score = valid_nll if valid else train_nll
        if score < best[0]:
            best = (score, [p.copy() for p in params])
            since_best = 0
        else:
            since_best += 1
            if valid and since_best >= config.patience:
                break
    for p, b in zip(params, best[1]):
        p[...] = b
    model._refresh()
    return model, trace
