"""Sparsity bitmaps: one pixel per weight, white kept, black pruned.

LSTM layers render as the four gate blocks stacked vertically, each block
showing [input weights | recurrent weights] side by side, which makes the
structural signatures visible: length-8 runs for block pruning, full rows
plus recurrent columns for unit pruning.
"""
from __future__ import annotations

import numpy as np

from .engine import LstmLayer, SeModel, WeightMatrix, mat_shape
from .quant import QuantTensor
from .sparse import SparseMatrix


class UnknownLayerError(KeyError):
    pass


def _mask_of(m: WeightMatrix) -> np.ndarray:
    if isinstance(m, SparseMatrix):
        return m.mask().bits
    return np.ones(mat_shape(m), dtype=bool)


GATE_ROWS = (("w_xi", "w_hi"), ("w_xf", "w_hf"), ("w_xc", "w_hc"), ("w_xo", "w_ho"))


def sparsity_bitmap(model: SeModel, layer_name: str) -> np.ndarray:
    """uint8 image of the layer's keep mask (255 kept, 0 pruned)."""
    layers = dict(model.layers())
    if layer_name not in layers:
        raise UnknownLayerError(f"no layer named {layer_name!r}")
    layer = layers[layer_name]
    if isinstance(layer, LstmLayer):
        bands = [np.hstack([_mask_of(getattr(layer, x)), _mask_of(getattr(layer, h))])
                 for x, h in GATE_ROWS]
        bits = np.vstack(bands)
    else:
        bits = _mask_of(layer.w)
    return np.where(bits, 255, 0).astype(np.uint8)


def encode_pgm(img: np.ndarray) -> bytes:
    """Binary PGM (P5), maxval 255."""
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.astype(np.uint8).tobytes()


def render_sparsity_map(model: SeModel, layer_name: str, out_path) -> None:
    with open(out_path, "wb") as f:
        f.write(encode_pgm(sparsity_bitmap(model, layer_name)))
