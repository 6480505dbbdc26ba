"""Hybrid decoding: acoustic posteriors x music language model / marginal prior.

A label sequence ``z_1 .. z_T`` is scored by

    sum_t  log P_lm(z_t | z_<t) + log P_am(z_t | x_t) - log P(z_t)

where the acoustic term is a product of independent per-pitch Bernoullis and
``P(z_t)`` is the factorized marginal prior.

Beam search keeps, at every depth, the ``w`` best partial sequences.  Each
parent draws candidate frames from a best-first enumerator over the
prior-scaled acoustic term ``log P_am(z|x) - log P(z)`` (which factorizes per
pitch just like the acoustic term itself).  Parents are swept round-robin, one
candidate each per sweep, into a capacity-``w`` queue.  Because the language
model term is never positive, a parent whose next candidate cannot beat the
queue minimum even with a perfect language-model score is finished; so is a
parent that has used its expansion budget or exhausted all ``2**N`` frames.

Ordering is total and deterministic: higher score first, then the
lexicographically smaller label sequence, then earlier insertion.
"""
import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .enumerator import ConfigEnumerator, SharedEnumeration
from .numeric import DimensionError, clamp_prob, sigmoid

EXHAUSTIVE_LIMIT = 16
_SLACK = 1e-9


@dataclass(frozen=True)
class DecoderConfig:
    beam_width: int = 100
    expansions_per_parent_cap: int = None
    max_tie_group: int = 4096

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam width must be at least 1")
        if self.expansions_per_parent_cap is not None and self.expansions_per_parent_cap < 1:
            raise ValueError("expansion cap must be at least 1")

    @property
    def cap(self):
        if self.expansions_per_parent_cap is not None:
            return self.expansions_per_parent_cap
        return max(2 * self.beam_width, 32)


@dataclass
class DecodeResult:
    frames: np.ndarray
    score: float
    expansions: int = 0
    stats: dict = field(default_factory=dict)


def hybrid_score_step(lm_logprob, acoustic_logprob, prior_logprob):
    """Per-frame log score: language model + acoustic - prior."""
    return lm_logprob + acoustic_logprob - prior_logprob


class _Frame:
    """Per-frame quantities shared by every hypothesis at one depth."""

    def __init__(self, post_t, prior, max_tie_group):
        p = clamp_prob(post_t)
        self.log_p1 = np.log(p)
        self.log_p0 = np.log1p(-p)
        scaled_logit = (self.log_p1 - self.log_p0) - (prior.log_on - prior.log_off)
        self.enum = SharedEnumeration(ConfigEnumerator(sigmoid(scaled_logit), max_tie_group))
        # log of the per-pitch normalizers turning the scaled Bernoulli back into
        # acoustic / prior ratios
        self.offset = float(np.logaddexp(self.log_p1 - prior.log_on,
                                         self.log_p0 - prior.log_off).sum())
        self.prior = prior
        self.am = []
        self.pr = []

    def config(self, k):
        return self.enum.get(k)

    def bound(self, k):
        """Upper bound on acoustic - prior for emission ``k`` and every later one."""
        b = self.enum.bound(k)
        return None if b is None else b + self.offset

    def scores(self, ks):
        """Acoustic and prior log-probabilities of emissions ``ks`` (cached)."""
        todo = [k for k in range(len(self.am), max(ks) + 1)]
        if todo:
            Z = np.array([self.enum.bits[k] for k in todo])
            self.am.extend(kernels.bernoulli_logprob_rows(self.log_p1, self.log_p0, Z).tolist())
            self.pr.extend(kernels.bernoulli_logprob_rows(self.prior.log_on, self.prior.log_off,
                                                          Z).tolist())
        return [self.am[k] for k in ks], [self.pr[k] for k in ks]


class _Node:
    """Persistent linked list of frames: one node per (hypothesis, depth)."""

    __slots__ = ("bits", "parent", "depth")

    def __init__(self, bits, parent):
        self.bits = bits
        self.parent = parent
        self.depth = 0 if parent is None else parent.depth + 1

    def frames(self):
        out = []
        node = self
        while node is not None and node.bits is not None:
            out.append(node.bits)
            node = node.parent
        out.reverse()
        return out


def _seq_key(node):
    return b"".join(b.tobytes() for b in node.frames())


class _Cand:
    """Queue entry. ``a < b`` means *a is worse than b*, so a heapq min-heap
    keeps the worst candidate on top."""

    __slots__ = ("score", "node", "order", "parent", "k")

    def __init__(self, score, node, order, parent, k):
        self.score = score
        self.node = node
        self.order = order
        self.parent = parent
        self.k = k

    def better_than(self, other):
        if self.score != other.score:
            return self.score > other.score
        ka, kb = _seq_key(self.node), _seq_key(other.node)
        if ka != kb:
            return ka < kb
        return self.order < other.order

    def __lt__(self, other):
        return other.better_than(self)


def _check_dims(post, lm, prior):
    post = np.asarray(post, dtype=np.float64)
    if post.ndim != 2:
        raise DimensionError("posteriors must be a (T, N) matrix")
    N = post.shape[1]
    if lm.n_pitches != N or prior.n_pitches != N:
        raise DimensionError(
            f"posteriors have {N} pitches, language model {lm.n_pitches}, prior {prior.n_pitches}")
    return post


def beam_search(posteriors, lm, prior, config=None, record=None):
    """Most likely label sequence under the hybrid score, with beam width ``w``.

    Parameters
    ----------
    posteriors : ndarray (T, N)
        Acoustic per-pitch probabilities.
    lm : GenRnn or RnnNade
    prior : MarginalPrior
    config : DecoderConfig
    record : list, optional
        If given, one dict per depth is appended with every generated candidate
        ``(parent, emission_index, score)`` and the kept ones, for auditing.

    Returns
    -------
    DecodeResult
    """
    config = config or DecoderConfig()
    post = _check_dims(posteriors, lm, prior)
    T, N = post.shape
    if T == 0:
        return DecodeResult(np.zeros((0, N), dtype=np.uint8), 0.0)
    w, cap = config.beam_width, config.cap

    parents = [_Cand(0.0, _Node(None, None), 0, None, None)]
    H = lm.init_state().h[None, :]
    expansions = 0
    for t in range(T):
        frame = _Frame(post[t], prior, config.max_tie_group)
        cond = lm.condition(H)
        queue = []
        order = itertools.count()
        cursor = [0] * len(parents)
        active = list(range(len(parents)))
        generated = [] if record is not None else None
        while active:
            picks = []
            still = []
            qmin = queue[0].score if len(queue) >= w else None
            for i in active:
                k = cursor[i]
                if k >= cap or frame.config(k) is None:
                    continue
                if qmin is not None:
                    b = parents[i].score + frame.bound(k)
                    if b < qmin - _SLACK * max(1.0, abs(qmin)):
                        continue
                picks.append((i, k))
                cursor[i] = k + 1
                still.append(i)
            if not picks:
                break
            rows = np.array([i for i, _ in picks], dtype=np.intp)
            ks = [k for _, k in picks]
            Z = np.array([frame.enum.bits[k] for k in ks])
            lm_lp = lm.logprob_rows(cond, rows, Z)
            am, pr = frame.scores(ks)
            for j, (i, k) in enumerate(picks):
                step = hybrid_score_step(float(lm_lp[j]), am[j], pr[j])
                cand = _Cand(parents[i].score + step, _Node(frame.enum.bits[k], parents[i].node),
                             next(order), i, k)
                if generated is not None:
                    generated.append((i, k, cand.score))
                if len(queue) < w:
                    heapq.heappush(queue, cand)
                elif queue[0] < cand:
                    heapq.heapreplace(queue, cand)
            expansions += len(picks)
            active = still
        kept = sorted(queue, reverse=True)
        if record is not None:
            record.append({"depth": t, "generated": generated,
                           "kept": [(c.parent, c.k, c.score) for c in kept]})
        Z = np.array([c.node.bits for c in kept])
        H = lm.advance_batch(H[[c.parent for c in kept]], Z)
        parents = kept
    best = parents[0]
    frames = np.array(best.node.frames(), dtype=np.uint8).reshape(T, N)
    return DecodeResult(frames, best.score, expansions)


def greedy_decode(posteriors, lm, prior, config=None):
    """Chronological decoding that commits to the best frame at every step.

    Candidates come from the same enumerator and stopping rule as the beam
    search, so the result equals ``beam_search`` with width 1.
    """
    base = config or DecoderConfig(beam_width=1)
    cap = DecoderConfig(1, base.expansions_per_parent_cap, base.max_tie_group).cap
    post = _check_dims(posteriors, lm, prior)
    T, N = post.shape
    out = np.zeros((T, N), dtype=np.uint8)
    state = lm.init_state()
    total = 0.0
    expansions = 0
    for t in range(T):
        frame = _Frame(post[t], prior, base.max_tie_group)
        cond = lm.condition(state.h[None, :])
        best_score, best_bits = None, None
        for k in range(cap):
            item = frame.config(k)
            if item is None:
                break
            if best_score is not None:
                if total + frame.bound(k) < best_score - _SLACK * max(1.0, abs(best_score)):
                    break
            bits = item[0]
            lm_lp = float(lm.logprob_rows(cond, np.zeros(1, dtype=np.intp), bits[None, :])[0])
            am, pr = frame.scores([k])
            score = total + hybrid_score_step(lm_lp, am[0], pr[0])
            expansions += 1
            if (best_score is None or score > best_score
                    or (score == best_score and bits.tobytes() < best_bits.tobytes())):
                best_score, best_bits = score, bits
        out[t] = best_bits
        total = best_score
        state = lm.advance(state, best_bits)
    return DecodeResult(out, total, expansions)


def all_configs(n):
    """All binary vectors of length ``n`` in lexicographic order, as (2**n, n)."""
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.uint8).reshape(-1, n)


def exhaustive_decode(posteriors, lm, prior):
    """Score every one of the ``2**(N*T)`` sequences; ties go to the
    lexicographically smallest.  Only for ``N * T <= 16``."""
    post = _check_dims(posteriors, lm, prior)
    T, N = post.shape
    if N * T > EXHAUSTIVE_LIMIT:
        raise ValueError(f"exhaustive decoding limited to N*T <= {EXHAUSTIVE_LIMIT}, got {N * T}")
    if T == 0:
        return DecodeResult(np.zeros((0, N), dtype=np.uint8), 0.0)
    configs = all_configs(N)
    C = len(configs)
    scores = np.zeros(1)
    H = lm.init_state().h[None, :]
    seqs = np.zeros((1, 0, N), dtype=np.uint8)
    for t in range(T):
        p = clamp_prob(post[t])
        am = kernels.bernoulli_logprob_rows(np.log(p), np.log1p(-p), configs)
        pr = kernels.bernoulli_logprob_rows(prior.log_on, prior.log_off, configs)
        M = len(scores)
        rows = np.repeat(np.arange(M), C)
        Z = np.tile(configs, (M, 1))
        lm_lp = lm.logprob_rows(lm.condition(H), rows, Z)
        cfg = np.tile(np.arange(C), M)
        scores = scores[rows] + hybrid_score_step(lm_lp, am[cfg], pr[cfg])
        H = lm.advance_batch(H[rows], Z)
        seqs = np.concatenate([seqs[rows], Z[:, None, :]], axis=1)
    best = int(np.argmax(scores))
    return DecodeResult(seqs[best].copy(), float(scores[best]), len(scores))


def score_sequence(posteriors, lm, prior, frames):
    """Independent re-scoring of a complete label sequence."""
    post = _check_dims(posteriors, lm, prior)
    frames = np.asarray(frames)
    state = lm.init_state()
    total = 0.0
    for t in range(post.shape[0]):
        p = clamp_prob(post[t])
        z = frames[t]
        am = float(kernels.bernoulli_logprob_rows(np.log(p), np.log1p(-p), z[None, :])[0])
        total += hybrid_score_step(lm.step_logprob(state, z), am, prior.logprob(z))
        state = lm.advance(state, z)
    return total
