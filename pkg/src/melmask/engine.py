"""Quantized mask-prediction network and the streaming enhancement engine.

Topology: two LSTM layers feeding two dense layers. Weights and
activations are 8-bit; the output layer runs at 16 bits so the sigmoid
mask keeps enough resolution. Nonlinearities use interpolated fixed-point
tables over [-8, 8) so results are bit-identical everywhere.

The cell state is held at 12 fractional bits and clamped to [-8, 8): the
update f*c + i*u can leave [-1, 1), while every other activation is
bounded by construction.

Streaming and one-shot processing share one state machine, so chunked
calls produce bit-identical output to a single call regardless of chunk
sizes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .quant import (Q8, Q16, QuantFormat, QuantTensor, quantize,
                    rshift_round_half_even)
from .sparse import KernelStats, SparseMatrix, StructureKind, dense_matvec_acc

# Pre-activation / cell-state domain: 12 fractional bits over [-8, 8).
PRE_FRAC = 12
PRE_MIN = -(1 << 15)
PRE_MAX = (1 << 15) - 1

_LUT_SEGMENTS = 1024
_LUT_SHIFT = 6  # 2**16 domain codes / 1024 segments


def _build_lut(fn) -> np.ndarray:
    xs = -8.0 + 16.0 * np.arange(_LUT_SEGMENTS + 1) / _LUT_SEGMENTS
    return np.clip(np.rint(fn(xs) * 32768.0), -32768, 32767).astype(np.int64)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


SIGMOID_LUT = _build_lut(_sigmoid)
TANH_LUT = _build_lut(np.tanh)


def lut_eval(table: np.ndarray, pre):
    """Interpolated table lookup; input is Q12 codes in [-8, 8), output Q15."""
    u = np.asarray(pre, dtype=np.int64) + (1 << 15)
    idx = u >> _LUT_SHIFT
    frac = u & ((1 << _LUT_SHIFT) - 1)
    e0 = table[idx]
    e1 = table[np.minimum(idx + 1, _LUT_SEGMENTS)]
    return rshift_round_half_even(e0 * 64 + (e1 - e0) * frac, _LUT_SHIFT)


def activation_codes(table: np.ndarray, pre, out_fmt: QuantFormat):
    """Nonlinearity over Q12 pre-activations, quantized to out_fmt."""
    q15 = lut_eval(table, pre)
    out = rshift_round_half_even(q15, 15 - out_fmt.frac_bits)
    return np.clip(out, out_fmt.qmin, out_fmt.qmax)


WeightMatrix = QuantTensor | SparseMatrix


def _is_unit(m: WeightMatrix) -> bool:
    return isinstance(m, SparseMatrix) and m.kind is StructureKind.UNIT


def mat_fmt(m: WeightMatrix) -> QuantFormat:
    return m.fmt


def mat_shape(m: WeightMatrix) -> tuple[int, int]:
    """Logical (pre-pruning) shape."""
    if isinstance(m, SparseMatrix):
        return m.rows, m.cols
    return m.shape


def mat_active_shape(m: WeightMatrix) -> tuple[int, int]:
    """Shape of the computation actually executed."""
    if _is_unit(m):
        return len(m.kept_rows), len(m.kept_cols)
    return mat_shape(m)


def mat_acc(m: WeightMatrix, x: np.ndarray, stats: KernelStats | None = None) -> np.ndarray:
    """Integer row accumulators; unit matrices run in reduced space."""
    if isinstance(m, SparseMatrix):
        return m.matvec_acc(x, stats=stats, reduced=_is_unit(m))
    return dense_matvec_acc(m, x, stats=stats)


def mat_mac_count(m: WeightMatrix) -> int:
    """MACs one matvec executes, honoring the sparse structure."""
    if isinstance(m, SparseMatrix):
        if m.kind is StructureKind.WEIGHT:
            return int(len(m.values))
        if m.kind is StructureKind.BLOCK:
            return int(len(m.block_col)) * m.structure.block_w
        return int(m.dense.size)
    return int(np.prod(m.shape))


LSTM_MATRIX_NAMES = ("w_xi", "w_hi", "w_xf", "w_hf", "w_xo", "w_ho", "w_xc", "w_hc")
LSTM_BIAS_NAMES = ("b_i", "b_f", "b_o", "b_u")


@dataclass
class LstmLayer:
    """One recurrent layer: four gates, each with input and recurrent weights.

    Matrices are stored output-major (out, in); hidden_size/input_size are
    the logical dimensions before any unit pruning.
    """

    w_xi: WeightMatrix
    w_hi: WeightMatrix
    w_xf: WeightMatrix
    w_hf: WeightMatrix
    w_xo: WeightMatrix
    w_ho: WeightMatrix
    w_xc: WeightMatrix
    w_hc: WeightMatrix
    b_i: QuantTensor
    b_f: QuantTensor
    b_o: QuantTensor
    b_u: QuantTensor

    def matrices(self) -> dict[str, WeightMatrix]:
        return {n: getattr(self, n) for n in LSTM_MATRIX_NAMES}

    def biases(self) -> dict[str, QuantTensor]:
        return {n: getattr(self, n) for n in LSTM_BIAS_NAMES}

    @property
    def hidden_size(self) -> int:
        return mat_shape(self.w_xi)[0]

    @property
    def input_size(self) -> int:
        return mat_shape(self.w_xi)[1]

    @property
    def active_hidden(self) -> int:
        return mat_active_shape(self.w_xi)[0]

    @property
    def active_input(self) -> int:
        return mat_active_shape(self.w_xi)[1]

    def validate(self):
        for name, m in self.matrices().items():
            if mat_fmt(m).bits != 8:
                raise ValueError(f"{name}: LSTM weights must be 8-bit")
        rows = {mat_active_shape(m)[0] for m in self.matrices().values()}
        if len(rows) != 1:
            raise ValueError("gate matrices disagree on output size")
        x_cols = {mat_active_shape(getattr(self, n))[1] for n in LSTM_MATRIX_NAMES if "x" in n}
        h_cols = {mat_active_shape(getattr(self, n))[1] for n in LSTM_MATRIX_NAMES if "h" in n}
        if len(x_cols) != 1 or len(h_cols) != 1:
            raise ValueError("gate matrices disagree on input size")
        if h_cols != rows:
            raise ValueError("recurrent width must match the active hidden size")
        for name, b in self.biases().items():
            if len(b.data) != self.active_hidden:
                raise ValueError(f"{name}: bias length mismatch")


@dataclass
class DenseLayer:
    w: WeightMatrix
    b: QuantTensor
    activation: str  # "tanh" or "sigmoid"

    def validate(self):
        if self.activation not in ("tanh", "sigmoid"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.b.data) != mat_active_shape(self.w)[0]:
            raise ValueError("bias length mismatch")

    @property
    def fmt(self) -> QuantFormat:
        return mat_fmt(self.w)

    @property
    def out_fmt(self) -> QuantFormat:
        return Q16 if self.fmt.bits == 16 else Q8


@dataclass
class SeModel:
    """Complete enhancement model: DSP config, input EQ, and the network."""

    dsp: dsp.DspConfig
    fb: dsp.MelFilterbank
    qeq: dsp.QeqParams
    lstm1: LstmLayer
    lstm2: LstmLayer
    dense1: DenseLayer
    dense2: DenseLayer

    def layers(self):
        return [("lstm1", self.lstm1), ("lstm2", self.lstm2),
                ("dense1", self.dense1), ("dense2", self.dense2)]

    def validate(self):
        if self.fb.bands != self.dsp.mel_bins or self.fb.bins != self.dsp.bins:
            raise ValueError("filterbank does not match the DSP config")
        if len(self.qeq.gain) != self.dsp.mel_bins:
            raise ValueError("EQ length does not match the band count")
        self.lstm1.validate()
        self.lstm2.validate()
        self.dense1.validate()
        self.dense2.validate()
        if self.lstm1.active_input != self.dsp.mel_bins:
            raise ValueError("lstm1 input must be the mel band count")
        if self.lstm2.active_input != self.lstm1.active_hidden:
            raise ValueError("lstm2 input width does not chain from lstm1")
        if mat_active_shape(self.dense1.w)[1] != self.lstm2.active_hidden:
            raise ValueError("dense1 input width does not chain from lstm2")
        if mat_active_shape(self.dense2.w)[1] != mat_active_shape(self.dense1.w)[0]:
            raise ValueError("dense2 input width does not chain from dense1")
        if mat_shape(self.dense2.w)[0] != self.dsp.mel_bins:
            raise ValueError("dense2 must produce one mask value per mel band")
        if self.dense1.activation != "tanh" or self.dense1.fmt.bits != 8:
            raise ValueError("dense1 must be an 8-bit tanh layer")
        if self.dense2.activation != "sigmoid" or self.dense2.fmt.bits != 16:
            raise ValueError("dense2 must be a 16-bit sigmoid layer")

    @property
    def is_causal(self) -> bool:
        # Frame-in/frame-out recurrence, no lookahead anywhere.
        return True

    @property
    def is_quantized(self) -> bool:
        return True

    def param_count(self) -> int:
        """Stored parameters: kept weights plus biases."""
        n = 0
        for _, layer in self.layers():
            if isinstance(layer, LstmLayer):
                mats, biases = layer.matrices().values(), layer.biases().values()
            else:
                mats, biases = [layer.w], [layer.b]
            for m in mats:
                if isinstance(m, SparseMatrix):
                    n += m.stored_weight_count()
                else:
                    n += int(np.prod(m.shape))
            for b in biases:
                n += len(b.data)
        return n


def _bias_acc(b: QuantTensor, acc_frac: int) -> np.ndarray:
    shift = acc_frac - b.fmt.frac_bits
    return np.asarray(b.data, dtype=np.int64) << shift


def _pre_activation(acc: np.ndarray, acc_frac: int) -> np.ndarray:
    pre = rshift_round_half_even(acc, acc_frac - PRE_FRAC)
    return np.clip(pre, PRE_MIN, PRE_MAX)


def lstm_step(layer: LstmLayer, x: np.ndarray, h_prev: np.ndarray,
              c_prev: np.ndarray, stats: KernelStats | None = None):
    """One recurrent update on integer codes.

    x and h_prev are Q8 codes; c_prev is Q12 cell codes. Returns (h, c).
    """
    acc_frac = 14  # Q8 weights times Q8 activations
    gates = {}
    for gate, wx, wh, b in (("i", layer.w_xi, layer.w_hi, layer.b_i),
                            ("f", layer.w_xf, layer.w_hf, layer.b_f),
                            ("o", layer.w_xo, layer.w_ho, layer.b_o),
                            ("u", layer.w_xc, layer.w_hc, layer.b_u)):
        acc = mat_acc(wx, x, stats) + mat_acc(wh, h_prev, stats) + _bias_acc(b, acc_frac)
        pre = _pre_activation(acc, acc_frac)
        table = TANH_LUT if gate == "u" else SIGMOID_LUT
        gates[gate] = activation_codes(table, pre, Q8)
    # f*c is Q19; align i*u (Q14) up before the single rounding back to Q12.
    c_acc = gates["f"] * np.asarray(c_prev, dtype=np.int64) + ((gates["i"] * gates["u"]) << 5)
    c = np.clip(rshift_round_half_even(c_acc, 7), PRE_MIN, PRE_MAX)
    tanh_c = activation_codes(TANH_LUT, c, Q8)
    h = np.clip(rshift_round_half_even(gates["o"] * tanh_c, 7), Q8.qmin, Q8.qmax)
    if stats is not None:
        stats.add(3 * len(h), 3 * len(h))  # f*c, i*u, o*tanh(c)
    return h.astype(np.int64), c.astype(np.int64)


def dense_step(layer: DenseLayer, x: np.ndarray, stats: KernelStats | None = None) -> np.ndarray:
    """Dense layer on Q8 input codes; output codes in the layer's out format."""
    acc_frac = layer.fmt.frac_bits + Q8.frac_bits
    acc = mat_acc(layer.w, x, stats) + _bias_acc(layer.b, acc_frac)
    pre = _pre_activation(acc, acc_frac)
    table = TANH_LUT if layer.activation == "tanh" else SIGMOID_LUT
    return activation_codes(table, pre, layer.out_fmt)


@dataclass
class EnhancerState:
    """Everything a single stream carries between chunks."""

    h1: np.ndarray
    c1: np.ndarray
    h2: np.ndarray
    c2: np.ndarray
    in_buf: np.ndarray
    ola: np.ndarray
    frames_done: int = 0

    @staticmethod
    def for_model(model: SeModel) -> "EnhancerState":
        return EnhancerState(
            h1=np.zeros(model.lstm1.active_hidden, dtype=np.int64),
            c1=np.zeros(model.lstm1.active_hidden, dtype=np.int64),
            h2=np.zeros(model.lstm2.active_hidden, dtype=np.int64),
            c2=np.zeros(model.lstm2.active_hidden, dtype=np.int64),
            in_buf=np.zeros(0, dtype=np.float64),
            ola=np.zeros(model.dsp.frame_size, dtype=np.float64),
        )

    def reset(self):
        self.h1[:] = 0
        self.c1[:] = 0
        self.h2[:] = 0
        self.c2[:] = 0
        self.in_buf = np.zeros(0, dtype=np.float64)
        self.ola[:] = 0.0
        self.frames_done = 0


def predict_mask_frame(model: SeModel, state: EnhancerState, features: np.ndarray,
                       stats: KernelStats | None = None) -> np.ndarray:
    """Advance the network one frame; returns the mel mask in [0, 1]."""
    x = np.asarray(features, dtype=np.int64)
    if len(x) != model.dsp.mel_bins:
        raise ValueError("feature length does not match the band count")
    state.h1, state.c1 = lstm_step(model.lstm1, x, state.h1, state.c1, stats)
    state.h2, state.c2 = lstm_step(model.lstm2, state.h1, state.h2, state.c2, stats)
    d1 = dense_step(model.dense1, state.h2, stats)
    mask_codes = dense_step(model.dense2, d1, stats)
    return mask_codes / model.dense2.out_fmt.scale


class Enhancer:
    """Streaming wrapper: feed arbitrary sample chunks, collect output.

    One Enhancer serves one stream; use separate instances for concurrent
    streams (the model itself is immutable and shareable).
    """

    def __init__(self, model: SeModel, stats: KernelStats | None = None):
        model.validate()
        self.model = model
        self.state = EnhancerState.for_model(model)
        self.stats = stats
        self._win = dsp.analysis_window(model.dsp)

    def reset(self):
        self.state.reset()

    def _process_frame(self, frame: np.ndarray) -> np.ndarray:
        cfg = self.model.dsp
        spec = np.fft.rfft(frame * self._win)
        feats = dsp.mel_features(spec[:, None], self.model.fb, self.model.qeq,
                                 cfg.power_exponent)[:, 0]
        codes = quantize(np.clip(feats, -1.0, 1.0), Q8)
        mask = predict_mask_frame(self.model, self.state, codes, self.stats)
        gated = (self.model.fb.weights.T @ mask) * spec
        return np.fft.irfft(gated, n=cfg.frame_size) * self._win

    def feed(self, samples: np.ndarray) -> np.ndarray:
        """Process as much input as possible; returns finalized samples."""
        cfg = self.model.dsp
        self.state.in_buf = np.concatenate([self.state.in_buf,
                                            np.asarray(samples, dtype=np.float64)])
        chunks = []
        while len(self.state.in_buf) >= cfg.frame_size:
            frame = self.state.in_buf[: cfg.frame_size]
            self.state.in_buf = self.state.in_buf[cfg.hop_size :]
            self.state.ola += self._process_frame(frame)
            chunks.append(self.state.ola[: cfg.hop_size].copy())
            self.state.ola = np.concatenate([self.state.ola[cfg.hop_size :],
                                             np.zeros(cfg.hop_size)])
            self.state.frames_done += 1
        return np.concatenate(chunks) if chunks else np.zeros(0)

    def flush(self) -> np.ndarray:
        """Emit the overlap-add tail of the last processed frame."""
        cfg = self.model.dsp
        if self.state.frames_done == 0:
            return np.zeros(0)
        return self.state.ola[: cfg.frame_size - cfg.hop_size].copy()


def enhance(model: SeModel, noisy: np.ndarray, stats: KernelStats | None = None) -> np.ndarray:
    """Run the full pipeline over a signal.

    Output covers the fully framed span: (frames - 1) * hop + frame samples,
    time-aligned with the input.
    """
    noisy = np.asarray(noisy, dtype=np.float64)
    if noisy.size == 0:
        raise ValueError("empty input")
    eng = Enhancer(model, stats=stats)
    body = eng.feed(noisy)
    return np.concatenate([body, eng.flush()])


def ops_per_frame(model: SeModel) -> int:
    """MACs executed per frame, honoring sparsity, plus LSTM elementwise work."""
    total = 0
    for _, layer in model.layers():
        if isinstance(layer, LstmLayer):
            total += sum(mat_mac_count(m) for m in layer.matrices().values())
            total += 3 * layer.active_hidden
        else:
            total += mat_mac_count(layer.w)
    return total


# -- double-precision reference path (testing only) --------------------------

def lstm_step_float(layer: LstmLayer, x: np.ndarray, h_prev: np.ndarray,
                    c_prev: np.ndarray):
    """Float mirror of lstm_step on dequantized weights; keeps the
    structural clamps but none of the rounding."""

    def dec(m):
        return m.decode().dequantized() if isinstance(m, SparseMatrix) else m.dequantized()

    def gate(wx, wh, b, fn):
        pre = dec(wx) @ x + dec(wh) @ h_prev + b.dequantized()
        return fn(np.clip(pre, -8.0, 8.0))

    i = gate(layer.w_xi, layer.w_hi, layer.b_i, _sigmoid)
    f = gate(layer.w_xf, layer.w_hf, layer.b_f, _sigmoid)
    o = gate(layer.w_xo, layer.w_ho, layer.b_o, _sigmoid)
    u = gate(layer.w_xc, layer.w_hc, layer.b_u, np.tanh)
    c = np.clip(f * c_prev + i * u, -8.0, 8.0)
    return o * np.tanh(c), c
