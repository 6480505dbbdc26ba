"""Dataset manifests and track loading.

Manifest format: UTF-8 text, one record per line, ``audio_path,midi_path[,split]``
with split one of ``train``, ``valid``, ``test``.  Lines starting with ``#``
and blank lines are skipped.  Relative paths resolve against the manifest's
directory.  Either every record carries a split label or none does; unlabeled
manifests are partitioned at random in the proportions 200:20:50.
"""
import os
from dataclasses import dataclass

import numpy as np

from .frontend import SpectrogramConfig, resample, stft_magnitude
from .midi import read_smf
from .numeric import make_rng
from .rolls import NoteEvent, notes_to_roll
from . import LOWEST_PITCH, N_PITCHES
from .wavio import read_wav

SPLITS = ("train", "valid", "test")
SPLIT_PROPORTIONS = (200, 20, 50)
SAMPLE_RATE = 16000.0


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class Record:
    audio_path: str
    midi_path: str
    split: str = None

    @property
    def name(self):
        return os.path.splitext(os.path.basename(self.audio_path))[0]


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple
    path: str = None


def parse_manifest(text, base_dir="."):
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) not in (2, 3) or not parts[0] or not parts[1]:
            raise ManifestError(f"line {lineno}: expected 'audio_path,midi_path[,split]'")
        split = parts[2] if len(parts) == 3 else None
        if split is not None and split not in SPLITS:
            raise ManifestError(f"line {lineno}: unknown split {split!r}")
        audio, midi = (p if os.path.isabs(p) else os.path.join(base_dir, p) for p in parts[:2])
        records.append(Record(audio, midi, split))
    if not records:
        raise ManifestError("manifest has no records")
    labeled = [r.split is not None for r in records]
    if any(labeled) and not all(labeled):
        first = labeled.index(False) if labeled[0] else labeled.index(True)
        raise ManifestError(f"record {first + 1}: mixes labeled and unlabeled records")
    return DatasetManifest(tuple(records))


def load_manifest(path):
    if not os.path.exists(path):
        raise ManifestError(f"manifest not found: {path}")
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    m = parse_manifest(text, os.path.dirname(os.path.abspath(path)))
    return DatasetManifest(m.records, path)


def split_counts(n):
    total = sum(SPLIT_PROPORTIONS)
    n_train = int(round(n * SPLIT_PROPORTIONS[0] / total))
    n_valid = int(round(n * SPLIT_PROPORTIONS[1] / total))
    n_valid = min(n_valid, n - n_train)
    return n_train, n_valid, n - n_train - n_valid


def split(manifest, seed=0):
    """Return ``{split: [Record, ...]}``.

    Explicit labels are used verbatim; otherwise records are shuffled with the
    seeded generator and cut 200:20:50 (exactly 200/20/50 for 270 records).
    """
    records = list(manifest.records)
    out = {s: [] for s in SPLITS}
    if records[0].split is not None:
        for r in records:
            out[r.split].append(r)
        return out
    order = make_rng(seed).permutation(len(records))
    n_train, n_valid, _ = split_counts(len(records))
    for rank, idx in enumerate(order):
        s = "train" if rank < n_train else "valid" if rank < n_train + n_valid else "test"
        out[s].append(Record(records[idx].audio_path, records[idx].midi_path, s))
    return out


def load_spectrogram(audio_path, hop_ms, window_ms=64.0, max_seconds=None):
    """Read a WAV file, resample to 16 kHz and return its magnitude spectrogram
    together with the clip duration in seconds."""
    clip = read_wav(audio_path)
    if clip.sample_rate != SAMPLE_RATE:
        clip = resample(clip, SAMPLE_RATE)
    if max_seconds is not None:
        n = int(round(max_seconds * SAMPLE_RATE))
        clip = type(clip)(clip.sample_rate, clip.samples[:n])
    cfg = SpectrogramConfig(window_ms, hop_ms, SAMPLE_RATE)
    return stft_magnitude(clip, cfg), clip.duration


def load_notes(midi_path, max_seconds=None):
    notes = read_smf(midi_path)
    if max_seconds is None:
        return notes
    return [NoteEvent(n.pitch, n.onset, min(n.offset, max_seconds))
            for n in notes if n.onset < max_seconds]


def load_roll(midi_path, hop_ms, duration_s, lowest_pitch=LOWEST_PITCH, n_pitches=N_PITCHES, max_seconds=None):
    return notes_to_roll(load_notes(midi_path, max_seconds), hop_ms, duration_s,
                         lowest_pitch, n_pitches)


def aligned_pair(frames, roll):
    """Truncate a (T, F) feature matrix and a roll to their common length."""
    T = min(frames.shape[0], roll.n_frames)
    return np.asarray(frames[:T]), roll.frames[:T].astype(np.float64)
