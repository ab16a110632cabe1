import numpy as np
import pytest

from melmask.dsp import InputTooShortError
from melmask.loudness import (SILENCE_LUFS, SilentStemError, lufs, mix_at_snr,
                              noise_gain_for_snr)

FS = 16000


def sine(freq, seconds, fs=FS, amp=1.0):
    return amp * np.sin(2 * np.pi * freq * np.arange(int(fs * seconds)) / fs)


def test_reference_tone_level():
    # 997 Hz full-scale sine reads -3.01 LUFS under K-weighting
    assert lufs(sine(997, 2.0), FS) == pytest.approx(-3.01, abs=0.1)
    assert lufs(sine(997, 2.0, fs=48000), 48000) == pytest.approx(-3.01, abs=0.1)


def test_gain_linearity():
    base = lufs(sine(997, 1.0, amp=0.25), FS)
    doubled = lufs(sine(997, 1.0, amp=0.5), FS)
    assert doubled - base == pytest.approx(6.0206, abs=0.05)


def test_silence_sentinel():
    assert lufs(np.zeros(FS), FS) == SILENCE_LUFS


def test_too_short_input():
    with pytest.raises(InputTooShortError):
        lufs(np.zeros(100), FS)


def test_identical_stems_at_zero_snr():
    rng = np.random.default_rng(0)
    stem = rng.normal(0, 0.1, FS)
    gain = noise_gain_for_snr(stem, stem.copy(), 0.0, FS)
    assert gain == pytest.approx(1.0, rel=0.01)


def test_six_db_from_symmetric_start():
    rng = np.random.default_rng(1)
    stem = rng.normal(0, 0.1, FS)
    gain = noise_gain_for_snr(stem, stem.copy(), 6.0, FS)
    assert 20 * np.log10(gain) == pytest.approx(-6.02, abs=0.1)


def test_random_stems_hit_requested_snr():
    rng = np.random.default_rng(2)
    for _ in range(5):
        speech = rng.normal(0, 0.15, 2 * FS) * (0.3 + 0.7 * rng.random(2 * FS))
        noise = rng.laplace(0, 0.02, 2 * FS)
        target = rng.uniform(-6, 9)
        gain = noise_gain_for_snr(speech, noise, target, FS)
        measured = lufs(speech, FS) - lufs(gain * noise, FS)
        assert measured == pytest.approx(target, abs=0.1)


def test_mix_returns_sum():
    rng = np.random.default_rng(3)
    speech = rng.normal(0, 0.1, FS)
    noise = rng.normal(0, 0.1, FS)
    mix = mix_at_snr(speech, noise, 3.0, FS)
    gain = noise_gain_for_snr(speech, noise, 3.0, FS)
    assert np.allclose(mix, speech + gain * noise)


def test_silent_stem_rejected():
    rng = np.random.default_rng(4)
    speech = rng.normal(0, 0.1, FS)
    with pytest.raises(SilentStemError):
        mix_at_snr(speech, np.zeros(FS), 0.0, FS)
    with pytest.raises(ValueError):
        mix_at_snr(speech, speech[: FS // 2], 0.0, FS)
