"""Note events and binary piano rolls.

Roll column ``j`` is MIDI pitch ``lowest_pitch + j``; the full piano roll has
88 columns starting at MIDI 21.  Frame ``t`` is considered to sound at its
center time ``(t + 0.5) * hop``.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import LOWEST_PITCH, N_PITCHES
from .numeric import DimensionError

HIGHEST_PITCH = LOWEST_PITCH + N_PITCHES - 1


@dataclass(frozen=True, order=True)
class NoteEvent:
    pitch: int
    onset: float
    offset: float

    def __post_init__(self):
        if not self.offset > self.onset:
            raise ValueError(f"note offset {self.offset} must exceed onset {self.onset}")
        if not LOWEST_PITCH <= self.pitch <= HIGHEST_PITCH:
            raise ValueError(f"pitch {self.pitch} outside {LOWEST_PITCH}-{HIGHEST_PITCH}")

    @property
    def duration(self):
        return self.offset - self.onset


@dataclass(frozen=True)
class PianoRoll:
    frames: np.ndarray
    hop_ms: float
    lowest_pitch: int = LOWEST_PITCH

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 2:
            raise DimensionError("piano roll must be 2-d (T, N)")
        if frames.size and not np.all((frames == 0) | (frames == 1)):
            raise ValueError("piano roll entries must be 0 or 1")
        if self.hop_ms <= 0:
            raise ValueError("hop_ms must be positive")
        object.__setattr__(self, "frames", frames.astype(np.uint8))

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def n_pitches(self):
        return self.frames.shape[1]

    def pitch_of(self, column):
        return self.lowest_pitch + column

    def column_of(self, pitch):
        return pitch - self.lowest_pitch

    def to_full(self):
        """Embed into the 88-key roll."""
        if self.lowest_pitch == LOWEST_PITCH and self.n_pitches == N_PITCHES:
            return self
        out = np.zeros((self.n_frames, N_PITCHES), dtype=np.uint8)
        start = self.lowest_pitch - LOWEST_PITCH
        out[:, start:start + self.n_pitches] = self.frames
        return PianoRoll(out, self.hop_ms)

    def crop(self, lowest_pitch, n_pitches):
        """Restrict to ``n_pitches`` columns starting at MIDI ``lowest_pitch``."""
        full = self.to_full().frames
        start = lowest_pitch - LOWEST_PITCH
        return PianoRoll(full[:, start:start + n_pitches], self.hop_ms, lowest_pitch)

    def truncate(self, n_frames):
        return PianoRoll(self.frames[:n_frames], self.hop_ms, self.lowest_pitch)


def n_frames_for(duration_s, hop_ms):
    # round first so 4.0 s / 10 ms is 400 frames, not 401
    return int(math.ceil(round(duration_s * 1000.0 / hop_ms, 9)))


def frame_centers(n_frames, hop_ms):
    return (np.arange(n_frames) + 0.5) * hop_ms / 1000.0


def notes_to_roll(notes, hop_ms, duration_s, lowest_pitch=LOWEST_PITCH, n_pitches=N_PITCHES):
    """Rasterize notes: pitch ``p`` is on in frame ``t`` iff the frame center
    lies in ``[onset, offset)``.  Notes outside the column range are ignored."""
    if hop_ms <= 0:
        raise ValueError("hop_ms must be positive")
    T = n_frames_for(duration_s, hop_ms)
    frames = np.zeros((T, n_pitches), dtype=np.uint8)
    centers = frame_centers(T, hop_ms)
    for note in notes:
        j = note.pitch - lowest_pitch
        if not 0 <= j < n_pitches:
            continue
        frames[(centers >= note.onset) & (centers < note.offset), j] = 1
    return PianoRoll(frames, hop_ms, lowest_pitch)


def roll_to_notes(roll):
    """One note per maximal run of active frames in each column.

    Onset is the run's first frame start time, offset the start time of the
    frame after the run.
    """
    notes = []
    frames = roll.frames
    T = frames.shape[0]
    for j in range(frames.shape[1]):
        col = np.concatenate([[0], frames[:, j].astype(np.int8), [0]])
        diff = np.diff(col)
        starts = np.flatnonzero(diff == 1)
        ends = np.flatnonzero(diff == -1)
        for s, e in zip(starts, ends):
            e = min(e, T)
            notes.append(NoteEvent(int(roll.pitch_of(j)), (int(s) * roll.hop_ms) / 1000.0,
                                   (int(e) * roll.hop_ms) / 1000.0))
    notes.sort(key=lambda n: (n.onset, n.pitch))
    return notes
