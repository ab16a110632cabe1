"""Spectral front end: framing, STFT pair, mel analysis, mask application.

The analysis/synthesis pair uses square-root periodic Hann windows at 50%
overlap, which satisfies constant overlap-add exactly, so interior samples
reconstruct to float precision. Feature extraction maps magnitude spectra
through a mel filterbank, compresses with a power law, then applies the
per-band input EQ (gain and bias) that compensates for the fixed [-1, 1]
quantization range of the network.
"""
from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np


class InputTooShortError(ValueError):
    """Signal shorter than one analysis frame (or one gating block)."""


class SampleRateMismatchError(ValueError):
    """Audio sample rate differs from the model's DSP configuration."""


@dataclass(frozen=True)
class DspConfig:
    sample_rate: int = 16000
    frame_size: int = 512
    hop_size: int = 256
    mel_bins: int = 128
    power_exponent: float = 0.3
    window: str = "sqrt_hann"

    def __post_init__(self):
        if self.hop_size * 2 != self.frame_size:
            raise ValueError("hop must be half the frame size")
        if self.mel_bins > self.frame_size // 2 + 1:
            raise ValueError("more mel bins than frequency bins")
        if not 0.0 < self.power_exponent <= 1.0:
            raise ValueError("power exponent must be in (0, 1]")
        if self.window != "sqrt_hann":
            raise ValueError(f"unsupported window {self.window!r}")

    @property
    def bins(self) -> int:
        return self.frame_size // 2 + 1

    @property
    def frame_deadline_s(self) -> float:
        """Time until the next frame is due."""
        return self.hop_size / self.sample_rate

    @property
    def audio_latency_s(self) -> float:
        """Buffering delay of the frame/hop scheme (frame plus hop)."""
        return (self.frame_size + self.hop_size) / self.sample_rate


def analysis_window(cfg: DspConfig) -> np.ndarray:
    # Periodic Hann so w^2 overlap-adds to exactly 1 at 50% overlap.
    n = np.arange(cfg.frame_size)
    hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / cfg.frame_size)
    return np.sqrt(hann)


def frame_count(n_samples: int, cfg: DspConfig) -> int:
    if n_samples < cfg.frame_size:
        return 0
    return 1 + (n_samples - cfg.frame_size) // cfg.hop_size


def stft(signal: np.ndarray, cfg: DspConfig) -> np.ndarray:
    """Complex spectrogram, shape (bins, frames); no padding, causal framing."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a mono signal")
    t = frame_count(len(x), cfg)
    if t == 0:
        raise InputTooShortError(f"need at least {cfg.frame_size} samples, got {len(x)}")
    win = analysis_window(cfg)
    offsets = np.arange(t) * cfg.hop_size
    frames = x[offsets[:, None] + np.arange(cfg.frame_size)] * win
    return np.fft.rfft(frames, axis=1).T


def istft(spec: np.ndarray, cfg: DspConfig) -> np.ndarray:
    """Overlap-add resynthesis. Edge regions lack full window coverage."""
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[0] != cfg.bins:
        raise ValueError(f"expected ({cfg.bins}, frames) spectrogram")
    t = spec.shape[1]
    win = analysis_window(cfg)
    frames = np.fft.irfft(spec.T, n=cfg.frame_size, axis=1) * win
    out = np.zeros((t - 1) * cfg.hop_size + cfg.frame_size)
    for k in range(t):
        out[k * cfg.hop_size : k * cfg.hop_size + cfg.frame_size] += frames[k]
    return out


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelFilterbank:
    """Nonnegative projection from linear bins to mel bands."""

    weights: np.ndarray  # (bands, bins)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or np.any(w < 0):
            raise ValueError("filterbank must be a nonnegative matrix")
        for r in range(w.shape[0]):
            nz = np.flatnonzero(w[r])
            if len(nz) == 0:
                raise ValueError(f"filter {r} has empty support")
            if not np.all(w[r, nz[0] : nz[-1] + 1] > 0):
                raise ValueError(f"filter {r} support is not contiguous")
        object.__setattr__(self, "weights", w)

    @property
    def bands(self) -> int:
        return self.weights.shape[0]

    @property
    def bins(self) -> int:
        return self.weights.shape[1]


def mel_filterbank(cfg: DspConfig) -> MelFilterbank:
    """Triangular filters, mel-spaced from 0 Hz to Nyquist, peak 1 per band."""
    nyq = cfg.sample_rate / 2.0
    edges = mel_to_hz(np.linspace(0.0, float(hz_to_mel(nyq)), cfg.mel_bins + 2))
    freqs = np.arange(cfg.bins) * cfg.sample_rate / cfg.frame_size
    w = np.zeros((cfg.mel_bins, cfg.bins))
    for b in range(cfg.mel_bins):
        lo, ctr, hi = edges[b], edges[b + 1], edges[b + 2]
        up = (freqs - lo) / max(ctr - lo, 1e-12)
        down = (hi - freqs) / max(hi - ctr, 1e-12)
        tri = np.maximum(0.0, np.minimum(up, down))
        if tri.max() <= 0.0:
            # Filter narrower than one bin: pin it to the closest bin.
            tri[np.argmin(np.abs(freqs - ctr))] = 1.0
        w[b] = tri / tri.max()
    return MelFilterbank(w)


@dataclass(frozen=True)
class QeqParams:
    """Per-band affine input EQ, loaded from the model file."""

    gain: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gain, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if g.shape != b.shape or g.ndim != 1:
            raise ValueError("gain and bias must be 1-D vectors of one length")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(b))):
            raise ValueError("gain and bias must be finite")
        object.__setattr__(self, "gain", g)
        object.__setattr__(self, "bias", b)

    @staticmethod
    def identity(bands: int) -> "QeqParams":
        return QeqParams(np.ones(bands), np.zeros(bands))


def mel_features(spec: np.ndarray, fb: MelFilterbank, qeq: QeqParams,
                 power_exponent: float = 0.3) -> np.ndarray:
    """Compressed, equalized mel features, shape (bands, frames), float.

    The caller clamps to [-1, 1] and quantizes before the network.
    """
    if spec.shape[0] != fb.bins:
        raise ValueError("spectrogram/filterbank bin mismatch")
    if len(qeq.gain) != fb.bands:
        raise ValueError("EQ length does not match band count")
    z = (fb.weights @ np.abs(spec)) ** power_exponent
    return qeq.gain[:, None] * z + qeq.bias[:, None]


def apply_mask(mask: np.ndarray, spec: np.ndarray, fb: MelFilterbank) -> np.ndarray:
    """Project a mel mask back to linear bins and gate the spectrogram.

    Phase is untouched; only magnitudes scale.
    """
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape[0] != fb.bands or spec.shape[0] != fb.bins:
        raise ValueError("mask/spectrogram/filterbank shape mismatch")
    if mask.shape[1] != spec.shape[1]:
        raise ValueError("mask and spectrogram frame counts differ")
    return (fb.weights.T @ mask) * spec


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read mono 16-bit PCM; returns (float64 samples in [-1, 1), rate).

    Accepts a filesystem path or a binary file object.
    """
    with wave.open(path if hasattr(path, "read") else str(path), "rb") as f:
        if f.getnchannels() != 1:
            raise ValueError("only mono WAV is supported")
        if f.getsampwidth() != 2:
            raise ValueError("only 16-bit PCM WAV is supported")
        raw = f.readframes(f.getnframes())
        rate = f.getframerate()
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def write_wav(path, samples: np.ndarray, rate: int) -> None:
    """Write mono 16-bit PCM, saturating out-of-range samples."""
    pcm = np.clip(np.rint(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(path if hasattr(path, "write") else str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(rate)
        f.writeframes(pcm.tobytes())
