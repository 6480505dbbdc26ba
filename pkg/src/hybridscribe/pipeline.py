"""End-to-end training and transcription built from the library pieces.

Shared by the command-line tool and the acceptance run.
"""
from dataclasses import dataclass

import numpy as np

from . import LOWEST_PITCH, N_PITCHES
from .acoustic import (AcousticTrainConfig, Dnn, DnnRnn, StackedRnn, posteriors,
                       train_acoustic)
from .dataset import load_manifest, load_notes, load_spectrogram, split
from .decoder import DecoderConfig, beam_search, greedy_decode
from .frontend import apply_standardizer, fit_standardizer
from .lm import GenRnn, LmTrainConfig, RnnNade, fit_marginal_prior, train_lm
from .numeric import DimensionError, make_rng
from .persistence import AcousticBundle, LmBundle
from .postproc import (apply_thresholds, fit_hmm, fit_thresholds, hmm_smooth, median_filter,
                       min_duration_prune, roll_to_notes)
from .rolls import PianoRoll, notes_to_roll

POST_KINDS = ("none", "threshold", "hmm", "median", "hybrid")
TRAIN_HOP_MS = 32.0
TEST_HOP_MS = 10.0
WINDOW_MS = 64.0


@dataclass(frozen=True)
class PitchRange:
    lowest: int = LOWEST_PITCH
    count: int = N_PITCHES

    def __post_init__(self):
        if self.count < 1 or self.lowest < LOWEST_PITCH or self.lowest + self.count > LOWEST_PITCH + N_PITCHES:
            raise ValueError(f"pitch range {self.lowest}..{self.lowest + self.count - 1} "
                             "must lie inside 21..108")


@dataclass
class Track:
    name: str
    frames: np.ndarray      # (T, F) raw magnitudes
    roll: PianoRoll         # aligned ground truth (T frames)
    notes: list             # ground-truth notes restricted to the pitch range


def load_tracks(records, hop_ms, pitches, max_seconds=None, window_ms=WINDOW_MS):
    """Spectrograms and aligned target rolls for manifest records."""
    out = []
    for rec in records:
        spec, duration = load_spectrogram(rec.audio_path, hop_ms, window_ms, max_seconds)
        notes = [n for n in load_notes(rec.midi_path, max_seconds)
                 if pitches.lowest <= n.pitch < pitches.lowest + pitches.count]
        roll = notes_to_roll(notes, hop_ms, duration, pitches.lowest, pitches.count)
        T = min(spec.n_frames, roll.n_frames)
        out.append(Track(rec.name, spec.frames[:T], roll.truncate(T), notes))
    return out


def load_rolls(records, hop_ms, pitches, max_seconds=None):
    """Ground-truth rolls only (no audio decoding beyond the duration)."""
    return [t.roll for t in load_tracks(records, hop_ms, pitches, max_seconds)]


def manifest_splits(manifest_path, seed=0):
    return split(load_manifest(manifest_path), seed)


def build_acoustic(kind, n_inputs, n_outputs, rng, dnn_hidden=(100, 100, 100),
                   rnn_hidden=(250, 250)):
    if kind == "dnn":
        return Dnn.init(n_inputs, n_outputs, dnn_hidden, rng)
    if kind == "rnn":
        return StackedRnn.init(n_inputs, n_outputs, rnn_hidden, rng)
    if kind == "dnn+rnn":
        dnn = Dnn.init(n_inputs, n_outputs, dnn_hidden, rng)
        return DnnRnn(dnn, StackedRnn.init(dnn.feature_size, n_outputs, rnn_hidden, rng))
    raise ValueError(f"unknown acoustic kind {kind!r}")


def train_acoustic_bundle(train, valid, kind, config, dnn_hidden=(100, 100, 100),
                          rnn_hidden=(250, 250), lowest_pitch=LOWEST_PITCH):
    """Fit the standardizer, train the network, and learn per-pitch thresholds
    on the training posteriors.  Returns ``(AcousticBundle, trace)``."""
    std = fit_standardizer([t.frames for t in train])
    pairs = lambda ts: [(apply_standardizer(std, t.frames), t.roll.frames.astype(np.float64))
                        for t in ts]
    train_pairs, valid_pairs = pairs(train), pairs(valid)
    n_out = train[0].roll.n_pitches
    model = build_acoustic(kind, train_pairs[0][0].shape[1], n_out, make_rng(config.seed),
                           dnn_hidden, rnn_hidden)
    model, trace = train_acoustic(model, train_pairs, valid_pairs, config)
    post = [posteriors(model, X) for X, _ in train_pairs]
    thresholds = fit_thresholds(post, [Y for _, Y in train_pairs])
    meta = {"kind": kind, "lowest_pitch": lowest_pitch, "n_pitches": n_out,
            "epochs": len(trace), "seed": config.seed, "lr": config.lr}
    return AcousticBundle(model, std, thresholds, meta), trace


def train_lm_bundle(train_rolls, valid_rolls, kind, config, hidden=100, nade_hidden=150,
                    lowest_pitch=LOWEST_PITCH):
    """Train a language model and fit the marginal prior and baseline HMM on
    the same rolls.  Returns ``(LmBundle, trace)``."""
    n = train_rolls[0].n_pitches
    rng = make_rng(config.seed)
    if kind == "nade":
        lm = RnnNade.init(n, hidden, nade_hidden, rng)
    elif kind == "rnn":
        lm = GenRnn.init(n, hidden, rng)
    else:
        raise ValueError(f"unknown language-model kind {kind!r}")
    lm, trace = train_lm(lm, train_rolls, valid_rolls, config)
    meta = {"kind": kind, "lowest_pitch": lowest_pitch, "n_pitches": n,
            "epochs": len(trace), "seed": config.seed, "lr": config.lr}
    return LmBundle(lm, fit_marginal_prior(train_rolls), fit_hmm(train_rolls), meta), trace


def acoustic_posteriors(bundle, frames):
    X = apply_standardizer(bundle.standardizer, frames)
    return posteriors(bundle.model, X)


def postprocess(post, kind, hop_ms, lowest_pitch, acoustic=None, lm_bundle=None,
                beam_width=100, median_window=5):
    """Binary roll from posteriors with one of :data:`POST_KINDS`."""
    P = np.asarray(post, dtype=np.float64)
    if kind == "none":
        return apply_thresholds(P, 0.5, hop_ms, lowest_pitch)
    if kind == "threshold":
        return apply_thresholds(P, acoustic.thresholds, hop_ms, lowest_pitch)
    if kind == "median":
        return median_filter(apply_thresholds(P, acoustic.thresholds, hop_ms, lowest_pitch),
                             median_window)
    if lm_bundle is None:
        raise ValueError(f"post-processing {kind!r} needs a language-model archive")
    if lm_bundle.lm.n_pitches != P.shape[1]:
        raise DimensionError("language model and acoustic model disagree on the pitch count")
    if kind == "hmm":
        return hmm_smooth(P, lm_bundle.hmm, lm_bundle.prior, hop_ms, lowest_pitch)
    if kind == "hybrid":
        if beam_width == 1:
            res = greedy_decode(P, lm_bundle.lm, lm_bundle.prior)
        else:
            res = beam_search(P, lm_bundle.lm, lm_bundle.prior, DecoderConfig(beam_width))
        return PianoRoll(res.frames, hop_ms, lowest_pitch)
    raise ValueError(f"unknown post-processing {kind!r}")


def roll_notes(roll, min_duration_ms):
    """``(pruned, unpruned)`` note lists extracted from a roll."""
    notes = roll_to_notes(roll)
    return min_duration_prune(notes, min_duration_ms), notes
