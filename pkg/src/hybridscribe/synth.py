"""Seeded synthetic transcription corpus.

Note sequences come from a fixed chord grammar: a Markov chain over the 24
major and minor triads, folded into one octave, with rhythm drawn from a
small set of durations.  Each chord sounds 1 to 3 of its voices.  Audio is a
sum of decaying harmonic partials per note, plus white noise.  Note times
live on a MIDI tick grid, so the written files parse back to exactly the
generating note list.
"""
import os
from dataclasses import dataclass

import numpy as np

from .midi import DEFAULT_TEMPO, encode_smf, ticks_to_seconds
from .numeric import make_rng
from .persistence import atomic_write_bytes
from .rolls import NoteEvent
from .wavio import encode_wav

# Chord moves as (root shift in semitones, target quality) with weights, for
# a major (0) and a minor (1) current chord.  The chain visits all 24 triads
# and hence all 12 pitch classes.
CHORD_MOVES = {
    0: (((0, 0), 0.10), ((5, 0), 0.25), ((7, 0), 0.25), ((9, 1), 0.20), ((2, 1), 0.10),
        ((4, 1), 0.10)),
    1: (((0, 1), 0.10), ((5, 1), 0.20), ((7, 0), 0.25), ((3, 0), 0.25), ((8, 0), 0.10),
        ((10, 0), 0.10)),
}
DURATION_TICKS = (240, 480, 720, 960)
DURATION_PROBS = (0.15, 0.45, 0.15, 0.25)
REST_TICKS = 120
REST_PROB = 0.15
HARMONIC_AMPS = (1.0, 0.5, 0.33, 0.25, 0.2, 0.15)


@dataclass(frozen=True)
class SynthConfig:
    n_train: int = 30
    n_valid: int = 5
    n_test: int = 10
    seconds: float = 6.0
    min_voices: int = 1
    max_voices: int = 3
    lowest_pitch: int = 60
    sample_rate: int = 16000
    tpq: int = 480
    tempo: int = DEFAULT_TEMPO
    noise: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.min_voices <= self.max_voices <= 3:
            raise ValueError("voices must satisfy 1 <= min <= max <= 3")
        if min(self.n_train, self.n_valid, self.n_test) < 0 or self.seconds <= 0:
            raise ValueError("track counts must be non-negative and duration positive")
        if not 21 <= self.lowest_pitch <= 108 - 11:
            raise ValueError("the 12-pitch range must fit inside 21..108")


def chord_pitches(root, quality, lowest_pitch=60):
    """Major (``quality`` 0) or minor (1) triad on pitch class ``root``, folded into one octave."""
    third = 4 if quality == 0 else 3
    return [lowest_pitch + (root + i) % 12 for i in (0, third, 7)]


def next_chord(rng, root, quality):
    moves = CHORD_MOVES[quality]
    k = int(rng.choice(len(moves), p=[w for _, w in moves]))
    (shift, target), _ = moves[k]
    return (root + shift) % 12, target


def sample_score(rng, config):
    """Note list ``[(pitch, on_tick, off_tick)]`` covering ``config.seconds``."""
    end = int(np.ceil(config.seconds * 1e6 * config.tpq / config.tempo))
    voice_choices = np.arange(config.min_voices, config.max_voices + 1)
    voice_probs = voice_choices / voice_choices.sum()
    root, quality = int(rng.integers(12)), int(rng.integers(2))
    tick = 0
    notes = []
    while tick < end:
        if tick > 0 and rng.random() < REST_PROB:
            tick += REST_TICKS
            continue
        dur = int(rng.choice(DURATION_TICKS, p=DURATION_PROBS))
        off = min(tick + dur, end)
        pitches = chord_pitches(root, quality, config.lowest_pitch)
        k = int(rng.choice(voice_choices, p=voice_probs))
        keep = np.sort(rng.choice(3, size=k, replace=False))
        for i in keep:
            notes.append((pitches[i], tick, off))
        tick += dur
        root, quality = next_chord(rng, root, quality)
    notes.sort(key=lambda n: (n[1], n[0]))
    return notes


def note_events(note_ticks, tpq=480, tempo=DEFAULT_TEMPO):
    notes = [NoteEvent(p, ticks_to_seconds(on, tempo, tpq), ticks_to_seconds(off, tempo, tpq))
             for p, on, off in note_ticks]
    return sorted(notes, key=lambda n: (n.onset, n.pitch, n.offset))


def midi_to_hz(pitch):
    return 440.0 * 2.0 ** ((pitch - 69) / 12.0)


def render_notes(notes, sample_rate=16000, duration=None, rng=None, noise=0.0,
                 decay_s=0.8, release_s=0.03):
    """Additive rendering: harmonic partials with exponential decay, a short
    linear attack, and a linear release after each offset.

    Parameters
    ----------
    notes : list of NoteEvent
    duration : float, optional
        Output length in seconds; defaults to the last offset plus the release.
    rng : numpy Generator, optional
        Source of per-note gain, partial-weight and decay jitter, and of the
        additive noise.
    noise : float
        Standard deviation of the white noise.
    """
    if duration is None:
        duration = max((n.offset for n in notes), default=0.0) + release_s
    n_samples = int(round(duration * sample_rate))
    out = np.zeros(n_samples)
    attack = max(1, int(0.005 * sample_rate))
    for note in notes:
        start = int(round(note.onset * sample_rate))
        stop = min(n_samples, int(round((note.offset + release_s) * sample_rate)))
        if stop <= start:
            continue
        t = np.arange(stop - start) / sample_rate
        f0 = midi_to_hz(note.pitch)
        amps = np.array(HARMONIC_AMPS)
        decay = decay_s
        if rng is not None:     # per-note timbre
            amps = amps * (0.5 + rng.random(len(amps)))
            decay = decay_s * (0.5 + rng.random())
        wave = np.zeros_like(t)
        for h, amp in enumerate(amps, start=1):
            if h * f0 < sample_rate / 2:
                wave += amp * np.sin(2 * np.pi * h * f0 * t)
        env = np.exp(-t / decay)
        env[:attack] *= np.arange(attack)[:min(attack, len(t))] / attack
        held = note.offset - note.onset
        env *= np.clip(1.0 - (t - held) / release_s, 0.0, 1.0)
        gain = 0.15 if rng is None else 0.15 * (0.7 + 0.6 * rng.random())
        out[start:stop] += gain * env * wave
    if noise > 0:
        if rng is None:
            raise ValueError("noise requires a random generator")
        out += noise * rng.standard_normal(n_samples)
    return out


def make_track(rng, config):
    """``(audio samples, SMF bytes, note events)`` for one track."""
    ticks = sample_score(rng, config)
    notes = note_events(ticks, config.tpq, config.tempo)
    audio = render_notes(notes, config.sample_rate, config.seconds, rng, config.noise)
    return audio, encode_smf(ticks, config.tpq, config.tempo), notes


def write_dataset(out_dir, config=SynthConfig()):
    """Write ``audio/*.wav``, ``midi/*.mid`` and ``manifest.csv`` under ``out_dir``.

    Returns the manifest path.  Identical configs give identical bytes.
    """
    os.makedirs(os.path.join(out_dir, "audio"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "midi"), exist_ok=True)
    rng = make_rng(config.seed)
    lines = ["# synthetic chord corpus, seed %d" % config.seed]
    splits = [("train", config.n_train), ("valid", config.n_valid), ("test", config.n_test)]
    for split, count in splits:
        for i in range(count):
            name = f"{split}_{i:03d}"
            audio, smf, _ = make_track(rng, config)
            atomic_write_bytes(os.path.join(out_dir, "audio", name + ".wav"),
                               encode_wav(audio, config.sample_rate))
            atomic_write_bytes(os.path.join(out_dir, "midi", name + ".mid"), smf)
            lines.append(f"audio/{name}.wav,midi/{name}.mid,{split}")
    path = os.path.join(out_dir, "manifest.csv")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))
    return path
