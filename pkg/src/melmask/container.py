"""Binary model container (.ssem): bit-exact save/load of a full model.

The byte layout is documented field-by-field in docs/container-format.md
and is shared with the checkpoint exporter, which writes the same format
from the TypeScript side. Saving is canonical: one model always produces
one byte stream. A CRC-32 of everything before the trailing checksum
guards against corruption.
"""
from __future__ import annotations

import hashlib
import struct
import zlib

import numpy as np

from .dsp import DspConfig, MelFilterbank, QeqParams
from .engine import (LSTM_BIAS_NAMES, LSTM_MATRIX_NAMES, DenseLayer,
                     LstmLayer, SeModel, WeightMatrix)
from .quant import Q8, Q16, QuantTensor
from .sparse import SparseMatrix, SparsityStructure, StructureKind

MAGIC = b"SSEM"
VERSION = 1

_KIND_LSTM = 1
_KIND_DENSE = 2
_ENC_DENSE = 0
_ENC_WEIGHT = 1
_ENC_BLOCK = 2
_ENC_UNIT = 3
_ACTIVATIONS = {"none": 0, "tanh": 1, "sigmoid": 2}
_ACTIVATION_NAMES = {v: k for k, v in _ACTIVATIONS.items()}


class ContainerError(ValueError):
    """Base class for malformed model containers."""


class BadMagicError(ContainerError):
    pass


class UnsupportedVersionError(ContainerError):
    pass


class CrcMismatchError(ContainerError):
    pass


class TruncatedError(ContainerError):
    pass


class ShapeChainError(ContainerError):
    """Layer shapes do not form a valid network."""


def _fmt_for_bits(bits: int):
    if bits == 8:
        return Q8
    if bits == 16:
        return Q16
    raise ShapeChainError(f"unsupported weight width {bits}")


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def raw(self, b: bytes):
        self.parts.append(b)

    def pack(self, fmt: str, *vals):
        self.parts.append(struct.pack("<" + fmt, *vals))

    def name(self, s: str):
        b = s.encode("utf-8")
        self.pack("B", len(b))
        self.raw(b)

    def ints(self, arr: np.ndarray, dtype: str):
        self.raw(np.ascontiguousarray(arr, dtype=dtype).tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedError("container ends mid-record")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        vals = struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))
        return vals if len(vals) > 1 else vals[0]

    def name(self) -> str:
        n = self.unpack("B")
        return self.take(n).decode("utf-8")

    def ints(self, count: int, dtype: str) -> np.ndarray:
        return np.frombuffer(self.take(count * np.dtype(dtype).itemsize), dtype=dtype).copy()


def _value_dtype(bits: int) -> str:
    return "<i1" if bits == 8 else "<i2"


def _write_matrix(w: _Writer, name: str, m: WeightMatrix):
    w.name(name)
    if isinstance(m, QuantTensor):
        rows, cols = m.shape
        w.pack("BBHH", _ENC_DENSE, m.fmt.bits, rows, cols)
        w.ints(m.data, _value_dtype(m.fmt.bits))
        return
    w.pack("BBHH", {StructureKind.WEIGHT: _ENC_WEIGHT,
                    StructureKind.BLOCK: _ENC_BLOCK,
                    StructureKind.UNIT: _ENC_UNIT}[m.kind],
           m.fmt.bits, m.rows, m.cols)
    if m.kind is StructureKind.WEIGHT:
        w.pack("I", len(m.values))
        w.ints(m.row_ptr, "<u4")
        w.ints(m.col_idx, "<u2")
        w.ints(m.values, _value_dtype(m.fmt.bits))
    elif m.kind is StructureKind.BLOCK:
        w.pack("BBI", m.structure.block_w, 0, len(m.block_col))
        w.ints(m.row_ptr, "<u4")
        w.ints(m.block_col, "<u2")
        w.ints(m.blocks, _value_dtype(m.fmt.bits))
    else:
        w.pack("HH", len(m.kept_rows), len(m.kept_cols))
        w.ints(m.kept_rows, "<u2")
        w.ints(m.kept_cols, "<u2")
        w.ints(m.dense, _value_dtype(m.fmt.bits))


def _read_matrix(r: _Reader) -> tuple[str, WeightMatrix]:
    name = r.name()
    enc, bits, rows, cols = r.unpack("BBHH")
    fmt = _fmt_for_bits(bits)
    if enc == _ENC_DENSE:
        vals = r.ints(rows * cols, _value_dtype(bits)).reshape(rows, cols)
        return name, QuantTensor(vals, fmt)
    if enc == _ENC_WEIGHT:
        nnz = r.unpack("I")
        row_ptr = r.ints(rows + 1, "<u4").astype(np.int64)
        col = r.ints(nnz, "<u2").astype(np.int32)
        vals = r.ints(nnz, _value_dtype(bits))
        return name, SparseMatrix(SparsityStructure.weight(), rows, cols, fmt,
                                  row_ptr=row_ptr, col_idx=col, values=vals)
    if enc == _ENC_BLOCK:
        bw, _pad, nblocks = r.unpack("BBI")
        row_ptr = r.ints(rows + 1, "<u4").astype(np.int64)
        bcol = r.ints(nblocks, "<u2").astype(np.int32)
        vals = r.ints(nblocks * bw, _value_dtype(bits)).reshape(nblocks, bw)
        return name, SparseMatrix(SparsityStructure.block(bw), rows, cols, fmt,
                                  row_ptr=row_ptr, block_col=bcol, blocks=vals)
    if enc == _ENC_UNIT:
        kr, kc = r.unpack("HH")
        kept_r = r.ints(kr, "<u2").astype(np.int64)
        kept_c = r.ints(kc, "<u2").astype(np.int64)
        vals = r.ints(kr * kc, _value_dtype(bits)).reshape(kr, kc)
        return name, SparseMatrix(SparsityStructure.unit(), rows, cols, fmt,
                                  kept_rows=kept_r, kept_cols=kept_c, dense=vals)
    raise ShapeChainError(f"unknown matrix encoding {enc}")


def _write_bias(w: _Writer, name: str, b: QuantTensor):
    w.name(name)
    w.pack("BH", b.fmt.bits, len(b.data))
    w.ints(b.data, _value_dtype(b.fmt.bits))


def _read_bias(r: _Reader) -> tuple[str, QuantTensor]:
    name = r.name()
    bits, length = r.unpack("BH")
    return name, QuantTensor(r.ints(length, _value_dtype(bits)), _fmt_for_bits(bits))


def dumps(model: SeModel) -> bytes:
    """Serialize to the canonical byte stream (identical model, identical bytes)."""
    model.validate()
    w = _Writer()
    w.raw(MAGIC)
    w.pack("HH", VERSION, 0)
    cfg = model.dsp
    w.pack("IHHHHBB", cfg.sample_rate, cfg.frame_size, cfg.hop_size,
           cfg.mel_bins, cfg.bins, 0, 0)
    w.pack("d", cfg.power_exponent)
    w.ints(model.qeq.gain, "<f8")
    w.ints(model.qeq.bias, "<f8")
    for band in model.fb.weights:
        nz = np.flatnonzero(band)
        start, count = int(nz[0]), int(nz[-1] - nz[0] + 1)
        w.pack("HH", start, count)
        w.ints(band[start : start + count], "<f8")
    w.pack("B", len(model.layers()))
    for lname, layer in model.layers():
        w.name(lname)
        if isinstance(layer, LstmLayer):
            w.pack("BBBB", _KIND_LSTM, _ACTIVATIONS["none"], 8, 4)
            for mname in LSTM_MATRIX_NAMES:
                _write_matrix(w, mname, getattr(layer, mname))
            for bname in LSTM_BIAS_NAMES:
                _write_bias(w, bname, getattr(layer, bname))
        else:
            w.pack("BBBB", _KIND_DENSE, _ACTIVATIONS[layer.activation], 1, 1)
            _write_matrix(w, "w", layer.w)
            _write_bias(w, "b", layer.b)
    body = w.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


def loads(buf: bytes) -> SeModel:
    """Parse and validate a container; raises a precise ContainerError."""
    if len(buf) < 8:
        raise TruncatedError("container shorter than its header")
    if buf[:4] != MAGIC:
        raise BadMagicError("not a model container")
    (version,) = struct.unpack("<H", buf[4:6])
    if version != VERSION:
        raise UnsupportedVersionError(f"container version {version} not supported")
    if len(buf) < 12:
        raise TruncatedError("container shorter than its checksum")
    (crc,) = struct.unpack("<I", buf[-4:])
    if zlib.crc32(buf[:-4]) != crc:
        raise CrcMismatchError("checksum mismatch (corrupt or truncated)")
    r = _Reader(buf[:-4])
    r.take(8)  # magic + version already checked
    sample_rate, frame, hop, mel, bins, _w, _pad = r.unpack("IHHHHBB")
    power = r.unpack("d")
    try:
        cfg = DspConfig(sample_rate=sample_rate, frame_size=frame, hop_size=hop,
                        mel_bins=mel, power_exponent=power)
    except ValueError as e:
        raise ShapeChainError(str(e)) from None
    if bins != cfg.bins:
        raise ShapeChainError("frequency bin count disagrees with the frame size")
    gain = r.ints(mel, "<f8")
    bias = r.ints(mel, "<f8")
    fbw = np.zeros((mel, cfg.bins))
    for band in range(mel):
        start, count = r.unpack("HH")
        if start + count > cfg.bins:
            raise ShapeChainError("filter support exceeds the bin count")
        fbw[band, start : start + count] = r.ints(count, "<f8")
    n_layers = r.unpack("B")
    layers = {}
    order = []
    for _ in range(n_layers):
        lname = r.name()
        kind, act, n_mat, n_bias = r.unpack("BBBB")
        mats = dict(_read_matrix(r) for _ in range(n_mat))
        biases = dict(_read_bias(r) for _ in range(n_bias))
        try:
            if kind == _KIND_LSTM:
                layers[lname] = LstmLayer(**mats, **biases)
            elif kind == _KIND_DENSE:
                layers[lname] = DenseLayer(w=mats["w"], b=biases["b"],
                                           activation=_ACTIVATION_NAMES.get(act, "none"))
            else:
                raise ShapeChainError(f"unknown layer kind {kind}")
        except TypeError as e:
            raise ShapeChainError(f"layer {lname}: {e}") from None
        order.append(lname)
    if r.pos != len(r.buf):
        raise TruncatedError("trailing bytes after the last layer")
    if order != ["lstm1", "lstm2", "dense1", "dense2"]:
        raise ShapeChainError(f"unexpected layer roster {order}")
    try:
        model = SeModel(dsp=cfg, fb=MelFilterbank(fbw),
                        qeq=QeqParams(gain, bias),
                        lstm1=layers["lstm1"], lstm2=layers["lstm2"],
                        dense1=layers["dense1"], dense2=layers["dense2"])
        model.validate()
    except ValueError as e:
        raise ShapeChainError(str(e)) from None
    return model


def save(model: SeModel, path) -> None:
    data = dumps(model)
    with open(path, "wb") as f:
        f.write(data)


def load(path) -> SeModel:
    with open(path, "rb") as f:
        return loads(f.read())


def weight_hash(model: SeModel) -> str:
    """SHA-256 over the decoded network weights in canonical order.

    Encoding-independent: a sparse matrix hashes the same as its decoded
    dense form, and every value is widened to int16 little-endian. Shared
    with the exporter's sidecar files.
    """
    h = hashlib.sha256(b"MMWH1")

    def tensor(name: str, rows: int, cols: int, bits: int, vals: np.ndarray):
        h.update(name.encode("utf-8") + b"\0")
        h.update(struct.pack("<IIB", rows, cols, bits))
        h.update(np.ascontiguousarray(vals, dtype="<i2").tobytes())

    for lname, layer in model.layers():
        if isinstance(layer, LstmLayer):
            for mname, m in layer.matrices().items():
                dec = m.decode().data if isinstance(m, SparseMatrix) else m.data
                tensor(f"{lname}.{mname}", *dec.shape, m.fmt.bits, dec)
            for bname, b in layer.biases().items():
                tensor(f"{lname}.{bname}", 1, len(b.data), b.fmt.bits, b.data)
        else:
            m = layer.w
            dec = m.decode().data if isinstance(m, SparseMatrix) else m.data
            tensor(f"{lname}.w", *dec.shape, m.fmt.bits, dec)
            tensor(f"{lname}.b", 1, len(layer.b.data), layer.b.fmt.bits, layer.b.data)
    return h.hexdigest()
