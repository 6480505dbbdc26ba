import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridscribe.lm import MarginalPrior
from hybridscribe.numeric import DimensionError, make_rng
from hybridscribe.postproc import (THRESHOLD_GRID, HmmPitchParams, ThresholdSet, apply_thresholds,
                                   fit_hmm, fit_thresholds, hmm_smooth, median_filter,
                                   min_duration_prune, path_score, roll_to_notes)
from hybridscribe.rolls import NoteEvent, PianoRoll, notes_to_roll


# -- thresholds ------------------------------------------------------------------------

def test_grid():
    assert len(THRESHOLD_GRID) == 99
    assert THRESHOLD_GRID[0] == 0.01 and THRESHOLD_GRID[-1] == 0.99


def test_separated_posteriors_pick_lowest_optimal():
    P = np.array([[0.9], [0.95], [0.1], [0.05]])
    Y = np.array([[1], [1], [0], [0]])
    assert fit_thresholds(P, Y).thresholds[0] == pytest.approx(0.11)


def test_inactive_pitch_defaults():
    assert fit_thresholds(np.array([[0.3], [0.8]]), np.zeros((2, 1))).thresholds[0] == 0.5


def test_posteriors_equal_to_truth():
    Y = np.array([[1, 0], [0, 1], [1, 1]])
    np.testing.assert_array_equal(fit_thresholds(Y.astype(float), Y).thresholds, [0.01, 0.01])


def test_fit_thresholds_lists_and_errors():
    P = [np.array([[0.9]]), np.array([[0.2]])]
    Y = [PianoRoll(np.array([[1]], dtype=np.uint8), 10.0, 60), np.array([[0]])]
    assert fit_thresholds(P, Y).thresholds[0] == pytest.approx(0.21)
    with pytest.raises(DimensionError):
        fit_thresholds(np.zeros((3, 2)), np.zeros((3, 1)))


def test_fit_thresholds_is_optimal_on_grid():
    rng = make_rng(0)
    P = rng.random((200, 3))
    Y = (rng.random((200, 3)) < P).astype(int)
    th = fit_thresholds(P, Y).thresholds
    for j in range(3):
        def f(t):
            pred = P[:, j] >= t
            tp = (pred & (Y[:, j] > 0)).sum()
            return 2 * tp / (pred.sum() + Y[:, j].sum())
        best = max(f(t) for t in THRESHOLD_GRID)
        assert f(th[j]) == best
        assert all(f(t) < best for t in THRESHOLD_GRID if t < th[j])


def test_threshold_set_validation():
    with pytest.raises(ValueError):
        ThresholdSet(np.array([0.5, 1.2]))


def test_apply_thresholds_examples():
    assert apply_thresholds(np.array([[0.4, 0.6]]), 0.5).frames.tolist() == [[0, 1]]
    roll = apply_thresholds(np.array([[0.0, 0.3], [0.2, 0.1]]), ThresholdSet(np.array([0.0, 1.0])))
    assert roll.frames[:, 0].tolist() == [1, 1] and roll.frames[:, 1].tolist() == [0, 0]


def test_apply_thresholds_elementwise():
    rng = make_rng(1)
    P, th = rng.random((30, 5)), rng.random(5)
    roll = apply_thresholds(P, th, hop_ms=32.0, lowest_pitch=40)
    for t, j in itertools.product(range(30), range(5)):
        assert roll.frames[t, j] == int(P[t, j] >= th[j])
    assert roll.hop_ms == 32.0 and roll.lowest_pitch == 40


# -- HMM -------------------------------------------------------------------------------

def test_fit_hmm_always_off():
    hmm = fit_hmm([np.zeros((100, 1))])
    assert hmm.trans[0, 0, 0] == pytest.approx(100 / 101)
    assert hmm.trans[0, 1].tolist() == [0.5, 0.5]
    assert hmm.init[0].tolist() == pytest.approx([2 / 3, 1 / 3])


def test_fit_hmm_alternating():
    roll = np.array([[t % 2] for t in range(200)])
    hmm = fit_hmm([roll])
    assert hmm.trans[0, 1, 0] > 0.99 and hmm.trans[0, 0, 1] > 0.99


def test_fit_hmm_single_frames_and_errors():
    hmm = fit_hmm([np.ones((1, 2)), np.zeros((1, 2))])
    np.testing.assert_array_equal(hmm.trans, 0.5)
    with pytest.raises(ValueError):
        fit_hmm([])


def test_hmm_params_validation():
    with pytest.raises(ValueError):
        HmmPitchParams(np.full((1, 2, 2), 0.6), np.full((1, 2), 0.5))
    with pytest.raises(DimensionError):
        HmmPitchParams(np.full((1, 2, 3), 0.5), np.full((1, 2), 0.5))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_fitted_hmm_is_stochastic_and_positive(seed):
    rng = make_rng(seed)
    rolls = [(rng.random((int(rng.integers(1, 20)), 4)) < 0.3) for _ in range(3)]
    hmm = fit_hmm(rolls)
    assert np.all(hmm.trans > 0) and np.all(hmm.init > 0)
    np.testing.assert_allclose(hmm.trans.sum(axis=2), 1.0, atol=1e-12, rtol=0)


def test_uniform_hmm_equals_half_threshold():
    rng = make_rng(2)
    P = rng.random((50, 6))
    P[:5] = 0.5
    prior = MarginalPrior(np.full(6, 0.5))
    out = hmm_smooth(P, HmmPitchParams.uniform(6), prior)
    assert np.array_equal(out.frames, apply_thresholds(P, 0.5).frames)


def test_sticky_hmm_removes_blip():
    P = np.array([[0.05], [0.05], [0.6], [0.05], [0.05]])
    hmm = HmmPitchParams(np.array([[[0.99, 0.01], [0.01, 0.99]]]), np.array([[0.5, 0.5]]))
    out = hmm_smooth(P, hmm, MarginalPrior(np.array([0.5])))
    assert not out.frames.any()


def _brute_force(emit, lt, li):
    best, arg = -np.inf, None
    for path in itertools.product((0, 1), repeat=emit.shape[0]):
        s = path_score(emit, lt, li, path)
        if s > best:
            best, arg = s, path
    return best, np.array(arg)


@pytest.mark.parametrize("seed", range(200))
def test_viterbi_equals_brute_force(seed):
    rng = make_rng(seed)
    T, N = int(rng.integers(1, 11)), 2
    P = rng.uniform(0.01, 0.99, (T, N))
    hmm = HmmPitchParams(rng.dirichlet([1, 1], size=(N, 2)), rng.dirichlet([1, 1], size=N))
    prior = MarginalPrior(rng.uniform(0.05, 0.95, N))
    out = hmm_smooth(P, hmm, prior).frames
    emit = np.stack([np.log1p(-P) - prior.log_off, np.log(P) - prior.log_on], axis=2)
    for j in range(N):
        best, _ = _brute_force(emit[:, j], np.log(hmm.trans[j]), np.log(hmm.init[j]))
        got = path_score(emit[:, j], np.log(hmm.trans[j]), np.log(hmm.init[j]), out[:, j])
        assert got == pytest.approx(best, abs=1e-12)


def test_hmm_dimension_mismatch():
    with pytest.raises(DimensionError):
        hmm_smooth(np.zeros((3, 2)), HmmPitchParams.uniform(3), MarginalPrior(np.full(2, 0.5)))


# -- median filter ---------------------------------------------------------------------

def test_median_window_one_is_identity():
    x = make_rng(3).random((10, 3))
    np.testing.assert_array_equal(median_filter(x, 1), x)


def test_median_removes_isolated_frame():
    roll = PianoRoll(np.array([[0], [0], [1], [0], [0]], dtype=np.uint8), 10.0, 60)
    out = median_filter(roll, 3)
    assert isinstance(out, PianoRoll) and not out.frames.any() and out.lowest_pitch == 60


def test_median_even_window_rejected():
    with pytest.raises(ValueError):
        median_filter(np.zeros((3, 1)), 4)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=30), st.sampled_from([1, 3, 5, 7]))
def test_median_matches_direct(col, window):
    x = np.array(col, dtype=np.uint8)[:, None]
    out = median_filter(x, window)
    T, h = len(col), window // 2
    for t in range(T):
        r = min(h, t, T - 1 - t)
        seg = sorted(col[t - r:t + r + 1])
        assert out[t, 0] == seg[len(seg) // 2]


# -- notes -----------------------------------------------------------------------------

def test_prune_examples():
    hop = 0.032
    two, three = NoteEvent(60, 0.0, 2 * hop), NoteEvent(61, 0.0, 3 * hop)
    assert min_duration_prune([two, three], 70) == [three]
    assert min_duration_prune([two, three], 0) == [two, three]
    with pytest.raises(ValueError):
        min_duration_prune([two], -1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 5), st.floats(0.001, 0.5)), max_size=20),
       st.floats(0, 300), st.floats(0, 300))
def test_prune_subset_and_monotone(spans, a, b):
    notes = [NoteEvent(60, on, on + d) for on, d in spans]
    lo, hi = sorted((a, b))
    kept_lo, kept_hi = min_duration_prune(notes, lo), min_duration_prune(notes, hi)
    assert all(n in notes for n in kept_lo)
    assert all(n in kept_lo for n in kept_hi)


def test_roll_to_notes_examples():
    assert roll_to_notes(PianoRoll(np.zeros((5, 2), dtype=np.uint8), 32.0, 60)) == []
    f = np.zeros((40, 1), dtype=np.uint8)
    f[0:31] = 1
    notes = roll_to_notes(PianoRoll(f, 32.0, 60))
    assert len(notes) == 1 and notes[0].onset == 0.0
    assert notes[0].offset == pytest.approx(0.992, abs=1e-12)
    g = np.array([[1], [1], [0], [1]], dtype=np.uint8)
    assert len(roll_to_notes(PianoRoll(g, 10.0, 60))) == 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_roll_note_round_trip_idempotent(seed):
    rng = make_rng(seed)
    T = int(rng.integers(1, 40))
    roll = PianoRoll((rng.random((T, 4)) < 0.4).astype(np.uint8), 10.0, 60)
    notes = roll_to_notes(roll)
    back = notes_to_roll(notes, 10.0, T * 0.010, 60, 4)
    assert np.array_equal(back.frames, roll.frames)
    assert roll_to_notes(back) == notes
