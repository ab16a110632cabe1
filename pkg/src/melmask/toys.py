"""Desk-scale model factories for tests, demos, and benchmarks.

These run the exact same code path as full-size models; only the
dimensions change.
"""
from __future__ import annotations

import numpy as np

from .dsp import DspConfig, MelFilterbank, QeqParams, mel_filterbank
from .engine import DenseLayer, LstmLayer, SeModel
from .quant import Q8, Q16, quantize_tensor

PAPER_DIMS = (128, 256, 256, 128)  # mel bands, lstm1, lstm2, dense1


def _lstm(rng: np.random.Generator, hidden: int, inp: int, recurrent_scale: float) -> LstmLayer:
    sx = 1.0 / np.sqrt(inp)
    sh = recurrent_scale / np.sqrt(hidden)

    def mx():
        return quantize_tensor(rng.uniform(-sx, sx, size=(hidden, inp)), Q8)

    def mh():
        return quantize_tensor(rng.uniform(-sh, sh, size=(hidden, hidden)), Q8)

    def bias():
        return quantize_tensor(rng.uniform(-0.1, 0.1, size=hidden), Q8)

    return LstmLayer(w_xi=mx(), w_hi=mh(), w_xf=mx(), w_hf=mh(),
                     w_xo=mx(), w_ho=mh(), w_xc=mx(), w_hc=mh(),
                     b_i=bias(), b_f=bias(), b_o=bias(), b_u=bias())


def random_model(seed: int = 0, dims: tuple[int, int, int, int] = (32, 16, 16, 16),
                 frame_size: int = 128, sample_rate: int = 16000,
                 recurrent_scale: float = 0.5) -> SeModel:
    """Reproducible random model; recurrent weights are kept small so the
    state stays well-behaved on arbitrary input."""
    mel, h1, h2, d1 = dims
    cfg = DspConfig(sample_rate=sample_rate, frame_size=frame_size,
                    hop_size=frame_size // 2, mel_bins=mel)
    rng = np.random.default_rng(seed)
    fb = mel_filterbank(cfg)
    qeq = QeqParams(rng.uniform(0.5, 1.5, mel), rng.uniform(-0.2, 0.2, mel))
    model = SeModel(
        dsp=cfg, fb=fb, qeq=qeq,
        lstm1=_lstm(rng, h1, mel, recurrent_scale),
        lstm2=_lstm(rng, h2, h1, recurrent_scale),
        dense1=DenseLayer(w=quantize_tensor(rng.uniform(-0.3, 0.3, (d1, h2)), Q8),
                          b=quantize_tensor(rng.uniform(-0.1, 0.1, d1), Q8),
                          activation="tanh"),
        dense2=DenseLayer(w=quantize_tensor(rng.uniform(-0.5, 0.5, (mel, d1)), Q16),
                          b=quantize_tensor(rng.uniform(-0.1, 0.1, mel), Q16),
                          activation="sigmoid"),
    )
    model.validate()
    return model


def paper_arch_model(seed: int = 0) -> SeModel:
    """Random weights at the full published architecture (about 0.97M params)."""
    return random_model(seed=seed, dims=PAPER_DIMS, frame_size=512)


def lowpass_denoiser_model(dims: tuple[int, int, int, int] = (32, 16, 16, 16),
                           frame_size: int = 128, sample_rate: int = 16000,
                           passband_fraction: float = 0.5) -> SeModel:
    """Hand-built model whose mask passes low mel bands and mutes the rest.

    The recurrent stack is zeroed; dense1 emits a constant positive vector
    and dense2 weights steer each band's sigmoid to ~1 or ~0. Useful as a
    model that genuinely improves SI-SDR on a lowpass-signal-plus-highpass-
    noise mixture without any training.
    """
    mel, h1, h2, d1 = dims
    cfg = DspConfig(sample_rate=sample_rate, frame_size=frame_size,
                    hop_size=frame_size // 2, mel_bins=mel)
    fb = mel_filterbank(cfg)
    zeros = lambda *s: quantize_tensor(np.zeros(s), Q8)

    def silent_lstm(hidden, inp):
        return LstmLayer(w_xi=zeros(hidden, inp), w_hi=zeros(hidden, hidden),
                         w_xf=zeros(hidden, inp), w_hf=zeros(hidden, hidden),
                         w_xo=zeros(hidden, inp), w_ho=zeros(hidden, hidden),
                         w_xc=zeros(hidden, inp), w_hc=zeros(hidden, hidden),
                         b_i=zeros(hidden), b_f=zeros(hidden),
                         b_o=zeros(hidden), b_u=zeros(hidden))

    cut = int(round(passband_fraction * mel))
    steer = np.full((mel, d1), -0.999)
    steer[:cut] = 0.999
    model = SeModel(
        dsp=cfg, fb=fb, qeq=QeqParams.identity(mel),
        lstm1=silent_lstm(h1, mel),
        lstm2=silent_lstm(h2, h1),
        dense1=DenseLayer(w=zeros(d1, h2),
                          b=quantize_tensor(np.full(d1, 0.75), Q8),
                          activation="tanh"),
        dense2=DenseLayer(w=quantize_tensor(steer, Q16),
                          b=quantize_tensor(np.zeros(mel), Q16),
                          activation="sigmoid"),
    )
    model.validate()
    return model
