"""Frame-level acoustic classifiers producing per-pitch posteriors.

All networks use sigmoid hidden units and a sigmoid output layer, one unit
per pitch, trained with binary cross-entropy.  Weights start from a zero-mean
Gaussian with standard deviation 0.01, biases at zero.
"""
from dataclasses import dataclass

import numpy as np

from .numeric import (DimensionError, Momentum, gaussian_init, log_sigmoid, make_rng,
                      sigmoid)


def _ce_from_logits(logits, Y):
    return -float((Y * log_sigmoid(logits) + (1 - Y) * log_sigmoid(-logits)).sum())


class Dnn:
    """Feed-forward network; ``layers`` is a list of ``(W, b)`` with ``W`` (out, in)."""

    kind = "dnn"

    def __init__(self, layers):
        self.layers = [(np.array(W, dtype=np.float64), np.array(b, dtype=np.float64))
                       for W, b in layers]
        for (W1, _), (W2, _) in zip(self.layers, self.layers[1:]):
            if W2.shape[1] != W1.shape[0]:
                raise DimensionError("layer dimensions do not chain")
        for W, b in self.layers:
            if b.shape != (W.shape[0],):
                raise DimensionError("bias length does not match layer width")

    @classmethod
    def init(cls, n_inputs, n_outputs, hidden=(100, 100, 100), rng=None, std=0.01):
        rng = rng if rng is not None else make_rng(0)
        sizes = [n_inputs, *hidden, n_outputs]
        return cls([(gaussian_init(rng, (o, i), std), np.zeros(o))
                    for i, o in zip(sizes[:-1], sizes[1:])])

    @property
    def n_inputs(self):
        return self.layers[0][0].shape[1]

    @property
    def n_outputs(self):
        return self.layers[-1][0].shape[0]

    @property
    def hidden_sizes(self):
        return [W.shape[0] for W, _ in self.layers[:-1]]

    def params(self):
        return [a for layer in self.layers for a in layer]

    def copy(self):
        return Dnn(self.layers)

    def _check_input(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_inputs:
            raise DimensionError(f"input has {X.shape[1]} features, network expects {self.n_inputs}")
        return X

    def activations(self, X):
        """Outputs of every layer, input excluded."""
        acts = []
        h = self._check_input(X)
        for W, b in self.layers:
            h = sigmoid(h @ W.T + b)
            acts.append(h)
        return acts

    def forward(self, X):
        """Per-pitch posteriors for each row of ``X`` (or for a single frame)."""
        single = np.ndim(X) == 1
        out = self.activations(X)[-1]
        return out[0] if single else out

    def features(self, X):
        """Concatenated hidden-layer activations (output layer excluded)."""
        single = np.ndim(X) == 1
        out = np.hstack(self.activations(X)[:-1])
        return out[0] if single else out

    @property
    def feature_size(self):
        return sum(self.hidden_sizes)

    def nll_and_grad(self, X, Y):
        X = self._check_input(X)
        acts = [X]
        for W, b in self.layers[:-1]:
            acts.append(sigmoid(acts[-1] @ W.T + b))
        W_out, b_out = self.layers[-1]
        logits = acts[-1] @ W_out.T + b_out
        loss = _ce_from_logits(logits, Y)
        delta = sigmoid(logits) - Y
        grads = []
        for li in range(len(self.layers) - 1, -1, -1):
            W, _ = self.layers[li]
            grads.append((delta.T @ acts[li], delta.sum(axis=0)))
            if li:
                h = acts[li]
                delta = (delta @ W) * h * (1.0 - h)
        grads.reverse()
        return loss, [g for pair in grads for g in pair]


def dnn_forward(params, frame):
    return params.forward(frame)


def dnn_feature_extract(params, frame):
    return params.features(frame)


class StackedRnn:
    """Uni-directional stacked Elman RNN with a sigmoid output layer.

    Layer ``l`` at time ``t`` sees layer ``l-1`` at ``t`` (the input frame for
    the first layer) and its own state at ``t-1``; states start at zero.
    """

    kind = "rnn"

    def __init__(self, layers, out):
        self.layers = [tuple(np.array(a, dtype=np.float64) for a in layer) for layer in layers]
        self.out = tuple(np.array(a, dtype=np.float64) for a in out)
        prev = self.layers[0][0].shape[1]
        for W_in, W_hh, b in self.layers:
            H = W_in.shape[0]
            if W_in.shape[1] != prev or W_hh.shape != (H, H) or b.shape != (H,):
                raise DimensionError("recurrent layer dimensions do not chain")
            prev = H
        if self.out[0].shape[1] != prev or self.out[1].shape != (self.out[0].shape[0],):
            raise DimensionError("output layer does not match the last recurrent layer")

    @classmethod
    def init(cls, n_inputs, n_outputs, hidden=(250, 250), rng=None, std=0.01):
        rng = rng if rng is not None else make_rng(0)
        layers = []
        prev = n_inputs
        for H in hidden:
            layers.append((gaussian_init(rng, (H, prev), std), gaussian_init(rng, (H, H), std),
                           np.zeros(H)))
            prev = H
        out = (gaussian_init(rng, (n_outputs, prev), std), np.zeros(n_outputs))
        return cls(layers, out)

    @property
    def n_inputs(self):
        return self.layers[0][0].shape[1]

    @property
    def n_outputs(self):
        return self.out[0].shape[0]

    @property
    def hidden_sizes(self):
        return [layer[0].shape[0] for layer in self.layers]

    def params(self):
        return [a for layer in self.layers for a in layer] + list(self.out)

    def copy(self):
        return StackedRnn(self.layers, self.out)

    def _states(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_inputs:
            raise DimensionError(f"input has {X.shape[1]} features, network expects {self.n_inputs}")
        states = [X]
        for W_in, W_hh, b in self.layers:
            U = states[-1] @ W_in.T
            Hs = np.empty((X.shape[0], W_in.shape[0]))
            h = np.zeros(W_in.shape[0])
            for t in range(X.shape[0]):
                h = sigmoid(U[t] + h @ W_hh.T + b)
                Hs[t] = h
            states.append(Hs)
        return states

    def forward(self, X):
        """Posteriors (T, N) for a (T, F) sequence of frames."""
        top = self._states(X)[-1]
        return sigmoid(top @ self.out[0].T + self.out[1])

    def nll_and_grad(self, X, Y):
        """Cross-entropy of one sequence and its exact BPTT gradient."""
        states = self._states(X)
        W_out, b_out = self.out
        logits = states[-1] @ W_out.T + b_out
        loss = _ce_from_logits(logits, Y)
        dlogit = sigmoid(logits) - Y
        g_out = (dlogit.T @ states[-1], dlogit.sum(axis=0))
        dH = dlogit @ W_out
        layer_grads = []
        for li in range(len(self.layers) - 1, -1, -1):
            W_in, W_hh, _ = self.layers[li]
            Hs, below = states[li + 1], states[li]
            T, H = Hs.shape
            dA = np.empty_like(Hs)
            carry = np.zeros(H)
            for t in range(T - 1, -1, -1):
                dh = dH[t] + carry
                da = dh * Hs[t] * (1.0 - Hs[t])
                dA[t] = da
                carry = da @ W_hh
            prev = np.vstack([np.zeros((1, H)), Hs[:-1]])
            layer_grads.append((dA.T @ below, dA.T @ prev, dA.sum(axis=0)))
            dH = dA @ W_in
        layer_grads.reverse()
        return loss, [g for lg in layer_grads for g in lg] + list(g_out)


def rnn_forward(params, frames):
    return params.forward(frames)


class DnnRnn:
    """Stacked RNN reading the hidden activations of a (separately trained) DNN."""

    kind = "dnn+rnn"

    def __init__(self, dnn, rnn):
        if rnn.n_inputs != dnn.feature_size:
            raise DimensionError("RNN input size must equal the DNN feature size")
        self.dnn = dnn
        self.rnn = rnn

    @property
    def n_inputs(self):
        return self.dnn.n_inputs

    @property
    def n_outputs(self):
        return self.rnn.n_outputs

    def forward(self, X):
        return self.rnn.forward(self.dnn.features(X))

    def copy(self):
        return DnnRnn(self.dnn.copy(), self.rnn.copy())


ACOUSTIC_KINDS = ("dnn", "rnn", "dnn+rnn")


def posteriors(model, X):
    """Posteriors (T, N) for a (T, F) matrix of standardized frames."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        return np.zeros((0, model.n_outputs))
    return model.forward(X)


# -- training -------------------------------------------------------------------------

@dataclass
class AcousticTrainConfig:
    lr: float = 0.1
    momentum: float = 0.9
    epochs: int = 200
    patience: int = 10
    dnn_batch: int = 256
    rnn_batch: int = 8
    seq_len: int = 200
    seed: int = 0


class TrainingDivergedError(RuntimeError):
    pass


def _frames_batches(pairs, config, rng):
    X = np.concatenate([p[0] for p in pairs])
    Y = np.concatenate([p[1] for p in pairs])
    order = rng.permutation(X.shape[0])
    for s in range(0, len(order), config.dnn_batch):
        idx = order[s:s + config.dnn_batch]
        yield [(X[idx], Y[idx])]


def _sequence_batches(pairs, config, rng):
    seqs = []
    for X, Y in pairs:
        for s in range(0, X.shape[0], config.seq_len):
            if X[s:s + config.seq_len].shape[0]:
                seqs.append((X[s:s + config.seq_len], Y[s:s + config.seq_len]))
    order = rng.permutation(len(seqs))
    for s in range(0, len(order), config.rnn_batch):
        yield [seqs[i] for i in order[s:s + config.rnn_batch]]


def mean_frame_loss(model, pairs):
    frames = sum(p[0].shape[0] for p in pairs)
    if not frames:
        return float("nan")
    if isinstance(model, Dnn):
        X = np.concatenate([p[0] for p in pairs])
        Y = np.concatenate([p[1] for p in pairs])
        return model.nll_and_grad(X, Y)[0] / frames
    return sum(model.nll_and_grad(X, Y)[0] for X, Y in pairs) / frames


def _train_network(model, train_pairs, valid_pairs, config, batches):
    rng = make_rng(config.seed)
    params = model.params()
    opt = Momentum(params, config.lr, config.momentum)
    best = (np.inf, [p.copy() for p in params])
    since_best = 0
    trace = []
    for epoch in range(1, config.epochs + 1):
        total, frames = 0.0, 0
        for batch in batches(train_pairs, config, rng):
            loss = 0.0
            grads = None
            n = 0
            for X, Y in batch:
                l, g = model.nll_and_grad(X, Y)
                loss += l
                n += X.shape[0]
                grads = g if grads is None else [a + b for a, b in zip(grads, g)]
            if not np.isfinite(loss) or not all(np.isfinite(g).all() for g in grads):
                raise TrainingDivergedError(f"acoustic loss or gradient became non-finite "
                                            f"in epoch {epoch}")
            opt.step([g / n for g in grads])
            total += loss
            frames += n
        train_loss = total / frames
        valid_loss = mean_frame_loss(model, valid_pairs) if valid_pairs else float("nan")
        trace.append((epoch, train_loss, valid_loss))
        score = valid_loss if valid_pairs else train_loss
        if score < best[0]:
            best = (score, [p.copy() for p in params])
            since_best = 0
        else:
            since_best += 1
            if valid_pairs and since_best >= config.patience:
                break
    for p, b in zip(params, best[1]):
        p[...] = b
    return trace


def train_acoustic(model, train_pairs, valid_pairs=(), config=None):
    """Train an acoustic model with momentum SGD on per-frame cross-entropy.

    ``train_pairs`` and ``valid_pairs`` are lists of ``(X, Y)`` with ``X``
    (T, F) standardized frames and ``Y`` (T, N) binary targets.  A DNN is
    trained on shuffled independent frames; RNNs by full back-propagation
    through time on subsequences of ``config.seq_len`` frames.  The step uses
    the gradient of the mean per-frame loss.  For ``dnn+rnn`` the DNN is
    trained first, then frozen while the RNN learns from its features.

    Returns ``(trained_model, trace)``; ``trace`` holds
    ``(stage, epoch, train_loss, valid_loss)`` rows with mean per-frame losses.
    """
    config = config or AcousticTrainConfig()
    train_pairs = [(np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64))
                   for X, Y in train_pairs if len(X)]
    valid_pairs = [(np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64))
                   for X, Y in valid_pairs if len(X)]
    if not train_pairs:
        raise ValueError("no training frames")
    model = model.copy()
    if isinstance(model, Dnn):
        trace = _train_network(model, train_pairs, valid_pairs, config, _frames_batches)
        return model, [("dnn", *row) for row in trace]
    if isinstance(model, StackedRnn):
        trace = _train_network(model, train_pairs, valid_pairs, config, _sequence_batches)
        return model, [("rnn", *row) for row in trace]
    if isinstance(model, DnnRnn):
        dnn_trace = _train_network(model.dnn, train_pairs, valid_pairs, config, _frames_batches)
        feat = lambda pairs: [(model.dnn.features(X), Y) for X, Y in pairs]
        rnn_trace = _train_network(model.rnn, feat(train_pairs), feat(valid_pairs), config,
                                   _sequence_batches)
        return model, [("dnn", *r) for r in dnn_trace] + [("rnn", *r) for r in rnn_trace]
    raise TypeError(f"unknown acoustic model {type(model).__name__}")


def frame_accuracy(model, pairs, threshold=0.5):
    """Fraction of frames whose thresholded prediction equals the target exactly."""
    hits = total = 0
    for X, Y in pairs:
        P = posteriors(model, X) >= threshold
        hits += int(np.all(P == (np.asarray(Y) > 0), axis=1).sum())
        total += len(Y)
    return hits / total if total else float("nan")
