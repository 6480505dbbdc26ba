import hashlib
import os

import numpy as np
import pytest

from hybridscribe.dataset import load_manifest, split
from hybridscribe.frontend import AudioClip, SpectrogramConfig, stft_magnitude
from hybridscribe.midi import parse_smf
from hybridscribe.numeric import make_rng
from hybridscribe.rolls import NoteEvent
from hybridscribe.synth import (CHORD_MOVES, SynthConfig, chord_pitches, make_track, midi_to_hz,
                                next_chord, note_events, render_notes, sample_score,
                                write_dataset)


def _tree_digest(root):
    h = hashlib.sha256()
    for dirpath, _, files in sorted(os.walk(root)):
        for f in sorted(files):
            p = os.path.join(dirpath, f)
            h.update(os.path.relpath(p, root).encode())
            with open(p, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


def test_grammar_weights_are_distributions():
    for moves in CHORD_MOVES.values():
        assert sum(w for _, w in moves) == pytest.approx(1.0, abs=1e-12)


def test_chord_pitches():
    assert chord_pitches(0, 0, 60) == [60, 64, 67]
    assert chord_pitches(9, 1, 60) == [69, 60, 64]


def test_chain_visits_every_pitch_class():
    rng = make_rng(0)
    root, q = 0, 0
    seen = set()
    for _ in range(500):
        seen.update(p % 12 for p in chord_pitches(root, q, 60))
        root, q = next_chord(rng, root, q)
    assert seen == set(range(12))


def test_score_respects_polyphony_and_range():
    cfg = SynthConfig(seconds=6.0)
    for seed in range(5):
        notes = sample_score(make_rng(seed), cfg)
        assert all(60 <= p < 72 for p, _, _ in notes)
        onsets = {}
        for p, on, off in notes:
            assert off > on
            onsets.setdefault(on, []).append(p)
        assert all(1 <= len(v) <= 3 for v in onsets.values())
        assert any(len(v) == 3 for v in onsets.values())


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(max_voices=4)
    with pytest.raises(ValueError):
        SynthConfig(lowest_pitch=100)


def test_single_note_peaks_at_fundamental_bin():
    for pitch in (60, 69, 71):
        audio = render_notes([NoteEvent(pitch, 0.0, 0.5)], 16000, 0.5)
        spec = stft_magnitude(AudioClip(16000, audio), SpectrogramConfig(64.0, 32.0))
        peak = int(np.argmax(spec.frames[3]))
        assert peak == round(midi_to_hz(pitch) * 1024 / 16000)


def test_render_is_silent_before_onset_and_after_release():
    audio = render_notes([NoteEvent(60, 0.1, 0.2)], 16000, 0.4, release_s=0.03)
    assert not audio[:1600].any()
    assert not audio[int(0.231 * 16000):].any()


def test_noise_requires_rng():
    with pytest.raises(ValueError):
        render_notes([], 16000, 0.1, noise=0.1)


def test_midi_round_trip_exact():
    cfg = SynthConfig()
    _, smf, notes = make_track(make_rng(3), cfg)
    assert parse_smf(smf) == notes


def test_note_events_timing():
    assert note_events([(60, 0, 480)]) == [NoteEvent(60, 0.0, 0.5)]


def test_dataset_is_byte_identical(tmp_path):
    cfg = SynthConfig(n_train=2, n_valid=1, n_test=1, seconds=1.0, seed=5)
    write_dataset(str(tmp_path / "a"), cfg)
    write_dataset(str(tmp_path / "b"), cfg)
    assert _tree_digest(tmp_path / "a") == _tree_digest(tmp_path / "b")
    other = SynthConfig(n_train=2, n_valid=1, n_test=1, seconds=1.0, seed=6)
    write_dataset(str(tmp_path / "c"), other)
    assert _tree_digest(tmp_path / "a") != _tree_digest(tmp_path / "c")


def test_dataset_manifest_splits(tmp_path):
    cfg = SynthConfig(n_train=3, n_valid=1, n_test=2, seconds=0.5)
    path = write_dataset(str(tmp_path), cfg)
    parts = split(load_manifest(path))
    assert [len(parts[s]) for s in ("train", "valid", "test")] == [3, 1, 2]
    assert all(os.path.exists(r.audio_path) and os.path.exists(r.midi_path)
               for recs in parts.values() for r in recs)
