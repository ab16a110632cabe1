import io

import numpy as np
import pytest

from melmask.dsp import (DspConfig, InputTooShortError, MelFilterbank,
                         QeqParams, analysis_window, apply_mask, frame_count,
                         istft, mel_features, mel_filterbank, read_wav, stft,
                         write_wav)

CFG = DspConfig()


def test_config_invariants():
    with pytest.raises(ValueError):
        DspConfig(frame_size=512, hop_size=128)
    with pytest.raises(ValueError):
        DspConfig(mel_bins=300)
    with pytest.raises(ValueError):
        DspConfig(power_exponent=0.0)
    assert CFG.bins == 257
    assert CFG.frame_deadline_s == pytest.approx(0.016)


def test_window_is_cola():
    w = analysis_window(CFG)
    ola = w ** 2
    interior = ola[: CFG.hop_size] + ola[CFG.hop_size :]
    assert np.allclose(interior, 1.0, atol=1e-12)


def test_stft_zero_signal():
    spec = stft(np.zeros(2048), CFG)
    assert spec.shape == (257, frame_count(2048, CFG))
    assert not spec.any()


def test_stft_too_short():
    with pytest.raises(InputTooShortError):
        stft(np.zeros(100), CFG)


def test_stft_matches_direct_dft():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 1500)
    spec = stft(x, CFG)
    win = analysis_window(CFG)
    n = CFG.frame_size
    k = np.arange(CFG.bins)
    dft = np.exp(-2j * np.pi * np.outer(k, np.arange(n)) / n)
    for t in range(spec.shape[1]):
        frame = x[t * CFG.hop_size : t * CFG.hop_size + n] * win
        assert np.allclose(spec[:, t], dft @ frame, atol=1e-9)


def test_bin_center_sinusoid_concentrates():
    bin_idx = 40
    f = bin_idx * CFG.sample_rate / CFG.frame_size
    t = np.arange(4 * CFG.frame_size) / CFG.sample_rate
    energy = np.abs(stft(np.sin(2 * np.pi * f * t), CFG)) ** 2
    for col in energy.T:
        # sqrt-Hann keeps nearly all tone energy within two neighboring bins
        near = col[bin_idx - 2 : bin_idx + 3]
        assert near.sum() > 0.99 * col.sum()
        assert np.argmax(col) == bin_idx


def test_istft_zero_and_impulse_frame():
    assert not istft(np.zeros((257, 3)), CFG).any()
    spec = np.ones((257, 1), dtype=complex)
    out = istft(spec, CFG)
    win = analysis_window(CFG)
    # inverse DFT of an all-ones spectrum, then the synthesis window
    expect = np.fft.irfft(np.ones(257), n=512) * win
    assert np.allclose(out, expect, atol=1e-12)


def test_stft_istft_round_trip_interior():
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, CFG.sample_rate)  # 1 s
    y = istft(stft(x, CFG), CFG)
    lo, hi = CFG.frame_size, len(y) - CFG.frame_size
    err = np.abs(y[lo:hi] - x[lo:hi])
    assert err.max() / np.abs(x[lo:hi]).max() < 1e-6


def test_filterbank_invariants():
    fb = mel_filterbank(CFG)
    assert fb.weights.shape == (128, 257)
    assert (fb.weights >= 0).all()
    for row in fb.weights:
        nz = np.flatnonzero(row)
        assert len(nz) > 0
        assert (row[nz[0] : nz[-1] + 1] > 0).all()
        assert row.max() == pytest.approx(1.0)


def test_filterbank_rejects_bad_matrices():
    with pytest.raises(ValueError):
        MelFilterbank(np.zeros((4, 9)))
    w = np.zeros((1, 9))
    w[0, [1, 5]] = 1.0  # hole in the support
    with pytest.raises(ValueError):
        MelFilterbank(w)


def test_mel_features_zero_bias_zero():
    fb = mel_filterbank(CFG)
    qeq = QeqParams.identity(128)
    feats = mel_features(np.zeros((257, 4)), fb, qeq)
    assert not feats.any()


def test_mel_features_selector_rows():
    w = np.zeros((4, 257))
    w[np.arange(4), [3, 50, 100, 200]] = 1.0
    fb = MelFilterbank(w)
    spec = np.ones((257, 5), dtype=complex)
    feats = mel_features(spec, fb, QeqParams.identity(4))
    assert np.allclose(feats, 1.0)  # 1 ** 0.3 == 1


def test_mel_features_matches_direct_formula():
    rng = np.random.default_rng(2)
    fb = mel_filterbank(CFG)
    qeq = QeqParams(rng.uniform(0.5, 2, 128), rng.uniform(-0.5, 0.5, 128))
    spec = rng.normal(size=(257, 7)) + 1j * rng.normal(size=(257, 7))
    feats = mel_features(spec, fb, qeq)
    direct = qeq.gain[:, None] * (fb.weights @ np.abs(spec)) ** 0.3 + qeq.bias[:, None]
    assert np.allclose(feats, direct, atol=1e-6)
    # monotone in |Y| elementwise
    bigger = mel_features(spec * 1.5, fb, qeq)
    gain_sign = np.sign(qeq.gain)[:, None]
    assert ((bigger - feats) * gain_sign >= -1e-12).all()


def test_apply_mask_zero_and_ones():
    fb = mel_filterbank(CFG)
    rng = np.random.default_rng(3)
    spec = rng.normal(size=(257, 6)) + 1j * rng.normal(size=(257, 6))
    assert not apply_mask(np.zeros((128, 6)), spec, fb).any()
    got = apply_mask(np.ones((128, 6)), spec, fb)
    col_sums = fb.weights.sum(axis=0)
    assert np.allclose(got, col_sums[:, None] * spec, atol=1e-9)


def test_apply_mask_matches_direct_arithmetic():
    fb = mel_filterbank(CFG)
    rng = np.random.default_rng(4)
    spec = rng.normal(size=(257, 5)) + 1j * rng.normal(size=(257, 5))
    mask = rng.uniform(0, 1, (128, 5))
    got = apply_mask(mask, spec, fb)
    assert np.allclose(got, (fb.weights.T @ mask) * spec, atol=1e-9)
    # phase untouched where magnitude survives
    scale = fb.weights.T @ mask
    keep = scale > 1e-9
    assert np.allclose(np.angle(got[keep]), np.angle(spec[keep]), atol=1e-9)


def test_apply_mask_shape_errors():
    fb = mel_filterbank(CFG)
    with pytest.raises(ValueError):
        apply_mask(np.ones((128, 4)), np.ones((257, 5), dtype=complex), fb)
    with pytest.raises(ValueError):
        apply_mask(np.ones((100, 5)), np.ones((257, 5), dtype=complex), fb)


def test_wav_round_trip():
    rng = np.random.default_rng(6)
    x = rng.uniform(-0.9, 0.9, 4000)
    buf = io.BytesIO()
    write_wav(buf, x, 16000)
    buf.seek(0)
    y, rate = read_wav(buf)
    assert rate == 16000
    assert np.abs(y - x).max() <= 1.0 / 32768 + 1e-9


def test_wav_rejects_stereo(tmp_path):
    import wave
    path = tmp_path / "stereo.wav"
    with wave.open(str(path), "wb") as f:
        f.setnchannels(2)
        f.setsampwidth(2)
        f.setframerate(16000)
        f.writeframes(b"\x00\x00\x00\x00" * 10)
    with pytest.raises(ValueError):
        read_wav(path)
