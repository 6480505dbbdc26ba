import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridscribe.frontend import (STD_FLOOR, AudioClip, Spectrogram, SpectrogramConfig,
                                   Standardizer, apply_standardizer, fit_standardizer,
                                   frame_count, hann_window, resample, stft_magnitude)
from hybridscribe.numeric import DimensionError, make_rng


def _sine(freq, rate, seconds, phase=0.0):
    t = np.arange(int(round(rate * seconds))) / rate
    return AudioClip(rate, np.sin(2 * np.pi * freq * t + phase))


def _peak_hz(x, rate):
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
    return np.argmax(spec) * rate / len(x)


# -- resampling ------------------------------------------------------------------------

def test_resample_constant():
    out = resample(AudioClip(32000, np.full(3200, 0.25)), 16000)
    assert out.sample_rate == 16000
    # the low-pass has unit DC gain; edges see the zero padding of the filter
    np.testing.assert_allclose(out.samples[20:-20], 0.25, atol=1e-12)


def test_resample_duration():
    out = resample(AudioClip(32000, np.zeros(32000)), 16000)
    assert abs(len(out.samples) - 16000) <= 1


def test_resample_empty():
    out = resample(AudioClip(44100, np.zeros(0)), 16000)
    assert out.samples.size == 0


def test_resample_keeps_sine_frequency():
    out = resample(_sine(440.0, 32000, 1.0), 16000)
    assert _peak_hz(out.samples, 16000) == pytest.approx(440.0, abs=1.0)


def test_resample_attenuates_above_new_nyquist():
    out = resample(_sine(11000.0, 32000, 1.0), 16000)
    assert np.sqrt(np.mean(out.samples[100:-100] ** 2)) < 0.05


def test_resample_round_trip_low_sine():
    clip = _sine(200.0, 16000, 1.0)
    up = resample(clip, 44100)
    back = resample(up, 16000)
    n = min(len(back.samples), len(clip.samples))
    a, b = back.samples[200:n - 200], clip.samples[200:n - 200]
    assert np.sqrt(np.mean((a - b) ** 2)) / np.sqrt(np.mean(b ** 2)) < 1e-2


def test_resample_rejects_bad_rate():
    with pytest.raises(ValueError):
        resample(AudioClip(16000, np.zeros(4)), 0)


# -- STFT ------------------------------------------------------------------------------

def test_default_config_sizes():
    cfg = SpectrogramConfig(64.0, 32.0, 16000.0)
    assert (cfg.window_length, cfg.hop_length, cfg.n_bins) == (1024, 512, 513)


def test_config_validation():
    with pytest.raises(ValueError):
        SpectrogramConfig(10.0, 32.0)


def test_zero_signal_zero_frames():
    spec = stft_magnitude(AudioClip(16000, np.zeros(4000)), SpectrogramConfig())
    assert spec.frames.shape == (frame_count(4000, 1024, 512), 513)
    assert not spec.frames.any()


@pytest.mark.parametrize("k", [5, 37, 200])
def test_bin_centered_sine_peaks_at_its_bin(k):
    cfg = SpectrogramConfig()
    clip = _sine(k * 16000 / 1024, 16000, 0.5, phase=0.3)
    spec = stft_magnitude(clip, cfg)
    assert spec.n_frames > 3
    assert (np.argmax(spec.frames, axis=1) == k).all()


def test_frame_matches_direct_dft():
    rng = make_rng(0)
    clip = AudioClip(16000, rng.standard_normal(3000))
    cfg = SpectrogramConfig()
    spec = stft_magnitude(clip, cfg)
    t = 2
    seg = clip.samples[t * 512:t * 512 + 1024] * hann_window(1024)
    n = np.arange(1024)
    direct = np.abs(np.exp(-2j * np.pi * np.outer(np.arange(513), n) / 1024) @ seg)
    np.testing.assert_allclose(spec.frames[t], direct, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("n,expected", [(0, 0), (511, 0), (512, 1), (1023, 1), (1024, 1),
                                        (1535, 1), (1536, 2), (5000, 8)])
def test_frame_count_policy(n, expected):
    assert frame_count(n, 1024, 512) == expected
    spec = stft_magnitude(AudioClip(16000, np.ones(n)), SpectrogramConfig())
    assert spec.n_frames == expected


def test_short_clip_zero_padded():
    x = np.ones(700)
    spec = stft_magnitude(AudioClip(16000, x), SpectrogramConfig())
    padded = np.concatenate([x, np.zeros(324)]) * hann_window(1024)
    np.testing.assert_allclose(spec.frames[0], np.abs(np.fft.rfft(padded)), rtol=1e-12)


def test_rate_mismatch_rejected():
    with pytest.raises(ValueError):
        stft_magnitude(AudioClip(8000, np.zeros(2048)), SpectrogramConfig())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 4000), st.integers(0, 1000))
def test_stft_nonnegative_and_count(n, seed):
    x = make_rng(seed).standard_normal(n)
    spec = stft_magnitude(AudioClip(16000, x), SpectrogramConfig(64.0, 10.0))
    assert spec.n_frames == frame_count(n, 1024, 160)
    assert (spec.frames >= 0).all()
    if n >= 1024:
        assert spec.n_frames == (n - 1024) // 160 + 1


def test_frame_times():
    spec = Spectrogram(np.zeros((3, 2)), 32.0)
    np.testing.assert_allclose(spec.frame_times, [0.0, 0.032, 0.064])


# -- standardization -------------------------------------------------------------------

def test_standardizer_identical_frames():
    s = fit_standardizer([np.ones((4, 3))])
    np.testing.assert_array_equal(s.std, STD_FLOOR)


def test_standardizer_hand_example():
    s = fit_standardizer([np.array([[0.0], [2.0]])])
    assert s.mean[0] == 1.0 and s.std[0] == 1.0


def test_standardizer_errors():
    with pytest.raises(ValueError):
        fit_standardizer([])
    with pytest.raises(ValueError):
        fit_standardizer([np.zeros((1, 3))])


def test_standardized_fitting_set_moments():
    rng = make_rng(5)
    frames = [Spectrogram(rng.random((50, 6)) * 3 + 1, 32.0), Spectrogram(rng.random((20, 6)), 32.0)]
    s = fit_standardizer(frames)
    out = np.concatenate([apply_standardizer(s, f).frames for f in frames])
    np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(out.std(axis=0), 1.0, atol=1e-9)


def test_apply_standardizer_examples():
    ident = Standardizer(np.zeros(2), np.ones(2))
    x = np.array([[3.0, -1.0]])
    np.testing.assert_array_equal(apply_standardizer(ident, x), x)
    s = Standardizer(np.array([1.0]), np.array([2.0]))
    np.testing.assert_array_equal(apply_standardizer(s, np.array([[3.0]])), [[1.0]])
    m = Standardizer(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    np.testing.assert_array_equal(apply_standardizer(m, np.array([[1.0, 2.0]])), [[0.0, 0.0]])


def test_apply_standardizer_dimension_mismatch():
    with pytest.raises(DimensionError):
        apply_standardizer(Standardizer(np.zeros(3), np.ones(3)), np.zeros((2, 4)))


def test_standardizer_rejects_nonpositive_std():
    with pytest.raises(ValueError):
        Standardizer(np.zeros(2), np.array([1.0, 0.0]))
