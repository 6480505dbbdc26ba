"""Audio to standardized magnitude-spectrogram frames.

Framing policy: frame ``t`` covers samples ``[t*hop, t*hop + window)``.  A clip
of at least ``window`` samples yields ``floor((len - window) / hop) + 1``
frames (trailing samples that do not fill a window are dropped).  A clip with
``hop <= len < window`` yields a single frame zero-padded to the window
length, and a clip shorter than one hop yields no frames.
"""
from dataclasses import dataclass, field

import numpy as np

from .numeric import DimensionError

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class AudioClip:
    sample_rate: float
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64).ravel())

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class SpectrogramConfig:
    window_ms: float = 64.0
    hop_ms: float = 32.0
    sample_rate: float = 16000.0

    def __post_init__(self):
        if not (self.window_ms >= self.hop_ms > 0):
            raise ValueError("need window_ms >= hop_ms > 0")

    @property
    def window_length(self):
        return int(round(self.window_ms * self.sample_rate / 1000.0))

    @property
    def hop_length(self):
        return int(round(self.hop_ms * self.sample_rate / 1000.0))

    @property
    def n_bins(self):
        return self.window_length // 2 + 1


@dataclass(frozen=True)
class Spectrogram:
    frames: np.ndarray
    hop_ms: float
    frame_times: np.ndarray = field(default=None)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2:
            raise DimensionError("spectrogram frames must be 2-d (T, F)")
        object.__setattr__(self, "frames", frames)
        if self.frame_times is None:
            times = np.arange(frames.shape[0]) * self.hop_ms / 1000.0
            object.__setattr__(self, "frame_times", times)

    @property
    def n_frames(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "std", np.asarray(self.std, dtype=np.float64))
        if self.mean.shape != self.std.shape:
            raise DimensionError("mean and std must have the same length")
        if np.any(self.std <= 0):
            raise ValueError("std entries must be positive")


def _lowpass_taps(ratio, half_width=8):
    """Centered Hann-windowed sinc with cutoff at ``1 / (2 * ratio)`` cycles/sample."""
    n = int(np.ceil(half_width * ratio))
    k = np.arange(-n, n + 1)
    cutoff = 0.5 / ratio
    taps = 2 * cutoff * np.sinc(2 * cutoff * k)
    taps *= 0.5 + 0.5 * np.cos(np.pi * k / (n + 1))
    return taps / taps.sum()


def resample(clip, target_rate):
    """Resample by linear interpolation.

    When downsampling, the signal first passes through a centered
    Hann-windowed sinc low-pass (cutoff at the new Nyquist frequency, about
    ``16 * ratio + 1`` taps) so tones above the new Nyquist are attenuated
    rather than aliased.  Output length is ``round(len * target / source)``.
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    x = clip.samples
    if len(x) == 0:
        return AudioClip(target_rate, np.zeros(0))
    if target_rate == clip.sample_rate:
        return AudioClip(target_rate, x.copy())
    ratio = clip.sample_rate / target_rate
    if ratio > 1:
        x = np.convolve(x, _lowpass_taps(ratio), mode="same")
    n_out = int(round(len(x) * target_rate / clip.sample_rate))
    pos = np.arange(n_out) * (clip.sample_rate / target_rate)
    y = np.interp(pos, np.arange(len(x)), x)
    return AudioClip(target_rate, y)


def hann_window(n):
    """Periodic Hann window of length ``n``."""
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def frame_count(n_samples, window, hop):
    if n_samples < hop:
        return 0
    if n_samples < window:
        return 1
    return (n_samples - window) // hop + 1


def stft_magnitude(clip, config):
    """Hann-windowed magnitude STFT, one row per frame, ``window // 2 + 1`` bins."""
    if abs(clip.sample_rate - config.sample_rate) > 1e-9:
        raise ValueError(
            f"clip rate {clip.sample_rate} does not match config rate {config.sample_rate}"
        )
    win, hop = config.window_length, config.hop_length
    x = clip.samples
    n = frame_count(len(x), win, hop)
    if n == 0:
        return Spectrogram(np.zeros((0, config.n_bins)), config.hop_ms)
    if len(x) < win:
        x = np.concatenate([x, np.zeros(win - len(x))])
    idx = np.arange(n)[:, None] * hop + np.arange(win)[None, :]
    frames = x[idx] * hann_window(win)
    mag = np.abs(np.fft.rfft(frames, axis=1))
    return Spectrogram(mag, config.hop_ms)


def fit_standardizer(training_frames):
    """Per-bin mean and population standard deviation over all frames.

    ``training_frames`` is a list of :class:`Spectrogram` (or 2-d arrays).
    """
    mats = [s.frames if isinstance(s, Spectrogram) else np.asarray(s, dtype=np.float64)
            for s in training_frames]
    mats = [m for m in mats if m.shape[0] > 0]
    if not mats:
        raise ValueError("cannot fit a standardizer on no frames")
    stacked = np.concatenate(mats, axis=0)
    if stacked.shape[0] < 2:
        raise ValueError("need at least 2 frames to fit a standardizer")
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), STD_FLOOR)
    return Standardizer(mean, std)


def apply_standardizer(standardizer, spec):
    frames = spec.frames if isinstance(spec, Spectrogram) else np.asarray(spec, dtype=np.float64)
    if frames.shape[1] != standardizer.mean.shape[0]:
        raise DimensionError(
            f"spectrogram has {frames.shape[1]} bins, standardizer has {standardizer.mean.shape[0]}"
        )
    out = (frames - standardizer.mean) / standardizer.std
    if isinstance(spec, Spectrogram):
        return Spectrogram(out, spec.hop_ms, spec.frame_times)
    return out
