"""Frame-level post-processing baselines and note-list clean-up."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .numeric import DimensionError, clamp_prob
from .rolls import NoteEvent, PianoRoll, roll_to_notes  # noqa: F401  (re-export)

THRESHOLD_GRID = np.array([k / 100.0 for k in range(1, 100)])
DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class ThresholdSet:
    thresholds: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.thresholds, dtype=np.float64)
        if np.any(th < 0) or np.any(th > 1):
            raise ValueError("thresholds must lie in [0, 1]")
        object.__setattr__(self, "thresholds", th)


def _f_measure(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return np.where(denom > 0, 2 * tp / np.maximum(denom, 1), 0.0)


def fit_thresholds(posteriors, truth):
    """Per-pitch threshold from the 0.01..0.99 grid maximizing that pitch's
    frame F-measure; ties go to the lowest threshold.  Pitches never active
    in ``truth`` get 0.5.

    ``posteriors`` and ``truth`` are (T, N) arrays or lists of them (stacked).
    """
    if isinstance(posteriors, (list, tuple)):
        posteriors = np.concatenate([np.asarray(p) for p in posteriors])
        truth = np.concatenate([np.asarray(getattr(r, "frames", r)) for r in truth])
    P = np.asarray(posteriors, dtype=np.float64)
    Y = np.asarray(getattr(truth, "frames", truth)) > 0
    if P.shape != Y.shape:
        raise DimensionError(f"posteriors {P.shape} and truth {Y.shape} are not aligned")
    th = np.full(P.shape[1], DEFAULT_THRESHOLD)
    for j in range(P.shape[1]):
        if not Y[:, j].any():
            continue
        pred = P[:, j][None, :] >= THRESHOLD_GRID[:, None]
        tp = (pred & Y[:, j]).sum(axis=1)
        fp = (pred & ~Y[:, j]).sum(axis=1)
        fn = (~pred & Y[:, j]).sum(axis=1)
        th[j] = THRESHOLD_GRID[int(np.argmax(_f_measure(tp, fp, fn)))]
    return ThresholdSet(th)


def apply_thresholds(posteriors, thresholds, hop_ms=10.0, lowest_pitch=21):
    P = np.asarray(posteriors, dtype=np.float64)
    th = getattr(thresholds, "thresholds", thresholds)
    th = np.broadcast_to(np.asarray(th, dtype=np.float64), (P.shape[1],))
    return PianoRoll((P >= th).astype(np.uint8), hop_ms, lowest_pitch)


@dataclass(frozen=True)
class HmmPitchParams:
    """Per-pitch two-state chains: ``trans[j, a, b] = P(b | a)``, ``init[j, s]``."""

    trans: np.ndarray
    init: np.ndarray

    def __post_init__(self):
        trans = np.asarray(self.trans, dtype=np.float64)
        init = np.asarray(self.init, dtype=np.float64)
        if trans.ndim != 3 or trans.shape[1:] != (2, 2) or init.shape != (trans.shape[0], 2):
            raise DimensionError("HMM parameters must be (N, 2, 2) and (N, 2)")
        if not np.allclose(trans.sum(axis=2), 1.0, atol=1e-12, rtol=0):
            raise ValueError("transition rows must sum to 1")
        if not np.allclose(init.sum(axis=1), 1.0, atol=1e-12, rtol=0):
            raise ValueError("initial distributions must sum to 1")
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "init", init)

    @property
    def n_pitches(self):
        return self.trans.shape[0]

    @classmethod
    def uniform(cls, n_pitches):
        return cls(np.full((n_pitches, 2, 2), 0.5), np.full((n_pitches, 2), 0.5))


def fit_hmm(rolls):
    """Add-one smoothed transition and initial-state estimates per pitch."""
    mats = [np.asarray(getattr(r, "frames", r)) > 0 for r in rolls]
    mats = [m for m in mats if m.shape[0] > 0]
    if not mats:
        raise ValueError("cannot fit an HMM on no frames")
    N = mats[0].shape[1]
    counts = np.zeros((N, 2, 2))
    first = np.zeros((N, 2))
    for m in mats:
        s = m.astype(np.intp)
        first[np.arange(N), s[0]] += 1
        for a in (0, 1):
            for b in (0, 1):
                counts[:, a, b] += ((s[:-1] == a) & (s[1:] == b)).sum(axis=0)
    trans = (counts + 1.0) / (counts.sum(axis=2, keepdims=True) + 2.0)
    init = (first + 1.0) / (len(mats) + 2.0)
    return HmmPitchParams(trans, init)


def hmm_smooth(posteriors, hmm, prior, hop_ms=10.0, lowest_pitch=21):
    """Per-pitch Viterbi with emission score ``log P(s | x) - log P(s)``.

    Ties between equally good paths are resolved toward the on state.
    """
    P = clamp_prob(posteriors)
    if P.ndim != 2 or P.shape[1] != hmm.n_pitches or P.shape[1] != prior.n_pitches:
        raise DimensionError("posteriors, HMM and prior disagree on the pitch count")
    emit = np.stack([np.log1p(-P) - prior.log_off, np.log(P) - prior.log_on], axis=2)
    path = kernels.viterbi_binary(emit, np.log(hmm.trans), np.log(hmm.init))
    return PianoRoll(path.astype(np.uint8), hop_ms, lowest_pitch)


def path_score(emit_j, log_trans_j, log_init_j, states):
    """Log score of one state path for a single pitch (used by tests and audits)."""
    s = log_init_j[states[0]] + emit_j[0, states[0]]
    for t in range(1, len(states)):
        s += log_trans_j[states[t - 1], states[t]] + emit_j[t, states[t]]
    return s


def median_filter(x, window=5):
    """Sliding median along time for every column.

    The window is centered and shrinks symmetrically near the edges (so it
    stays odd and binary inputs stay binary).  Accepts a :class:`PianoRoll`
    or a (T, N) array and returns the same type.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("median window must be an odd positive integer")
    is_roll = isinstance(x, PianoRoll)
    A = np.asarray(x.frames if is_roll else x)
    T = A.shape[0]
    half = window // 2
    out = np.empty(A.shape, dtype=np.float64)
    for t in range(T):
        r = min(half, t, T - 1 - t)
        out[t] = np.median(A[t - r:t + r + 1], axis=0)
    if is_roll:
        return PianoRoll(out.astype(np.uint8), x.hop_ms, x.lowest_pitch)
    return out.astype(A.dtype) if A.dtype != np.float64 else out


def min_duration_prune(notes, min_ms=70.0):
    """Drop notes shorter than ``min_ms`` milliseconds."""
    if min_ms < 0:
        raise ValueError("min_ms must be non-negative")
    limit = min_ms / 1000.0
    return [n for n in notes if not (n.offset - n.onset) < limit]
