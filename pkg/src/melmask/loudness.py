"""Gated loudness measurement (BS.1770 style) and loudness-matched mixing.

Noise is scaled against speech by perceptual loudness rather than raw
energy, which keeps mixtures from being dominated by sparse impulsive
noise when targeting an SNR.
"""
from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .dsp import InputTooShortError

SILENCE_LUFS = float("-inf")

BLOCK_S = 0.400
BLOCK_OVERLAP = 0.75
ABSOLUTE_GATE_LUFS = -70.0


class SilentStemError(ValueError):
    """A mixing stem measured as digital silence."""


def _k_weighting(fs: float):
    """Head-model shelf + rumble high-pass biquads for an arbitrary rate.

    Coefficients are re-derived from the analog filter parameters (De Man's
    formulation), matching the standard's 48 kHz tables.
    """
    # Stage 1: high shelf (+4 dB above ~1.5 kHz).
    f0, g_db, q = 1681.9744509555319, 3.99984385397, 0.7071752369554193
    k = np.tan(np.pi * f0 / fs)
    vh = 10.0 ** (g_db / 20.0)
    vb = vh ** 0.499666774155
    a0 = 1.0 + k / q + k * k
    shelf_b = np.array([vh + vb * k / q + k * k, 2.0 * (k * k - vh), vh - vb * k / q + k * k]) / a0
    shelf_a = np.array([1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0])
    # Stage 2: high-pass at ~38 Hz.
    f0, q = 38.13547087602444, 0.5003270373238773
    k = np.tan(np.pi * f0 / fs)
    a0 = 1.0 + k / q + k * k
    hp_b = np.array([1.0, -2.0, 1.0])
    hp_a = np.array([1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0])
    return (shelf_b, shelf_a), (hp_b, hp_a)


def lufs(signal: np.ndarray, sample_rate: int) -> float:
    """Integrated loudness of a mono signal, gated; -inf for silence."""
    x = np.asarray(signal, dtype=np.float64)
    block = int(round(BLOCK_S * sample_rate))
    if len(x) < block:
        raise InputTooShortError(f"need at least {BLOCK_S * 1e3:.0f} ms of audio")
    (sb, sa), (hb, ha) = _k_weighting(sample_rate)
    y = lfilter(hb, ha, lfilter(sb, sa, x))

    hop = int(round(block * (1.0 - BLOCK_OVERLAP)))
    n_blocks = 1 + (len(y) - block) // hop
    offsets = np.arange(n_blocks) * hop
    seg = y[offsets[:, None] + np.arange(block)]
    z = np.mean(seg * seg, axis=1)

    with np.errstate(divide="ignore"):
        levels = -0.691 + 10.0 * np.log10(z)
    keep = levels > ABSOLUTE_GATE_LUFS
    if not np.any(keep):
        return SILENCE_LUFS
    rel_threshold = -0.691 + 10.0 * np.log10(np.mean(z[keep])) - 10.0
    keep &= levels > rel_threshold
    if not np.any(keep):
        return SILENCE_LUFS
    return float(-0.691 + 10.0 * np.log10(np.mean(z[keep])))


def noise_gain_for_snr(speech: np.ndarray, noise: np.ndarray, target_snr_db: float,
                       sample_rate: int, tol_db: float = 0.02, max_iter: int = 5) -> float:
    """Linear gain for the noise stem so LUFS(speech) - LUFS(gain*noise) hits target.

    Gating makes loudness slightly nonlinear in gain, so the estimate is
    refined by re-measurement.
    """
    if len(speech) != len(noise):
        raise ValueError("stems must have equal length")
    l_speech = lufs(speech, sample_rate)
    l_noise = lufs(noise, sample_rate)
    if l_speech == SILENCE_LUFS or l_noise == SILENCE_LUFS:
        raise SilentStemError("cannot mix against a silent stem")
    want = l_speech - target_snr_db
    gain = 10.0 ** ((want - l_noise) / 20.0)
    for _ in range(max_iter):
        measured = lufs(gain * noise, sample_rate)
        if measured == SILENCE_LUFS:
            raise SilentStemError("scaled noise gated to silence")
        delta = want - measured
        if abs(delta) <= tol_db:
            break
        gain *= 10.0 ** (delta / 20.0)
    return gain


def mix_at_snr(speech: np.ndarray, noise: np.ndarray, target_snr_db: float,
               sample_rate: int) -> np.ndarray:
    """Speech plus loudness-scaled noise at the requested SNR."""
    gain = noise_gain_for_snr(speech, noise, target_snr_db, sample_rate)
    return np.asarray(speech, dtype=np.float64) + gain * np.asarray(noise, dtype=np.float64)
