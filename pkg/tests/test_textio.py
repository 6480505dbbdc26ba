import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridscribe.numeric import DimensionError, make_rng
from hybridscribe.rolls import NoteEvent, PianoRoll
from hybridscribe.textio import (TextFormatError, format_notes, format_roll, parse_notes,
                                 parse_roll, read_text, write_text)


def test_roll_format_example():
    roll = PianoRoll(np.array([[0, 0, 0], [1, 0, 1]], dtype=np.uint8), 10.0, 60)
    assert format_roll(roll) == "HSROLL hop_ms=10 n_pitches=3 n_frames=2 lowest_pitch=60\n000\n101\n"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([10.0, 32.0, 12.5]))
def test_roll_round_trip(seed, hop):
    rng = make_rng(seed)
    roll = PianoRoll((rng.random((int(rng.integers(0, 20)), 5)) < 0.5).astype(np.uint8), hop, 40)
    back = parse_roll(format_roll(roll))
    assert np.array_equal(back.frames, roll.frames) and back.frames.shape == roll.frames.shape
    assert back.hop_ms == hop and back.lowest_pitch == 40


def test_roll_parse_errors():
    with pytest.raises(TextFormatError):
        parse_roll("")
    with pytest.raises(TextFormatError):
        parse_roll("HSROLL hop_ms=10 n_pitches=2\n01\n")
    with pytest.raises(DimensionError):
        parse_roll("HSROLL hop_ms=10 n_pitches=2 n_frames=3\n01\n")
    with pytest.raises(TextFormatError):
        parse_roll("HSROLL hop_ms=10 n_pitches=2 n_frames=1\n012\n")


def test_notes_format_and_round_trip():
    notes = [NoteEvent(64, 0.25, 1.0), NoteEvent(60, 0.0, 0.5)]
    text = format_notes(notes)
    assert text == "60,0.000000,0.500000\n64,0.250000,1.000000\n"
    assert parse_notes("# comment\n\n" + text) == notes[::-1]


def test_notes_parse_errors():
    with pytest.raises(TextFormatError):
        parse_notes("60,0.5\n")
    with pytest.raises(TextFormatError):
        parse_notes("60,0.5,0.4\n")


def test_text_files(tmp_path):
    write_text(tmp_path / "x.notes", "a\n")
    assert read_text(tmp_path / "x.notes") == "a\n"
