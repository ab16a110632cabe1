"""Model introspection shared by the service endpoints and the CLI."""
from __future__ import annotations

import numpy as np

from . import analysis, container
from .engine import LstmLayer, SeModel, mat_shape, ops_per_frame
from .sparse import SparseMatrix, StructureKind, sparsity


def _layer_parts(layer):
    if isinstance(layer, LstmLayer):
        return list(layer.matrices().values()), list(layer.biases().values())
    return [layer.w], [layer.b]


def _logical_layer_params(layer) -> int:
    mats, biases = _layer_parts(layer)
    n = sum(int(np.prod(mat_shape(m))) for m in mats)
    # biases pair with logical output rows even when unit-reduced
    n += mat_shape(mats[0])[0] * len(biases)
    return n


def _stored_layer_params(layer) -> int:
    mats, biases = _layer_parts(layer)
    n = sum(m.stored_weight_count() if isinstance(m, SparseMatrix)
            else int(np.prod(m.shape)) for m in mats)
    return n + sum(len(b.data) for b in biases)


def layer_encoding(layer) -> str:
    kinds = {m.kind.value if isinstance(m, SparseMatrix) else "dense"
             for m in _layer_parts(layer)[0]}
    if kinds == {"dense"}:
        return "dense"
    kinds.discard("dense")
    return kinds.pop() if len(kinds) == 1 else "mixed"


def model_structure(model: SeModel) -> str:
    kinds = {layer_encoding(layer) for _, layer in model.layers()}
    kinds.discard("dense")
    if not kinds:
        return "dense"
    return kinds.pop() if len(kinds) == 1 else "mixed"


def overall_sparsity(model: SeModel) -> float:
    logical = sum(_logical_layer_params(l) for _, l in model.layers())
    return 1.0 - model.param_count() / logical


def estimated_speedup(model: SeModel,
                      speedup_model: analysis.SpeedupModel = analysis.DEFAULT_SPEEDUP) -> float:
    kind = model_structure(model)
    if kind in ("dense", "mixed"):
        return 1.0
    return speedup_model.estimate(StructureKind(kind), overall_sparsity(model))


def layer_infos(model: SeModel) -> list[dict]:
    out = []
    for name, layer in model.layers():
        mats, _ = _layer_parts(layer)
        rows, cols = mat_shape(mats[0])
        stored = _stored_layer_params(layer)
        logical = _logical_layer_params(layer)
        sp = (float(np.mean([sparsity(m) for m in mats if isinstance(m, SparseMatrix)]))
              if layer_encoding(layer) != "dense" else 0.0)
        out.append({
            "name": name,
            "kind": "lstm" if isinstance(layer, LstmLayer) else "dense",
            "out_size": rows,
            "in_size": cols,
            "weight_bits": mats[0].fmt.bits,
            "encoding": layer_encoding(layer),
            "params": stored,
            "sparsity": 1.0 - stored / logical,
            "weight_sparsity_mean": sp,
        })
    return out


def describe(model: SeModel) -> dict:
    fp = analysis.estimate_footprint(model)
    return {
        "sample_rate": model.dsp.sample_rate,
        "frame_size": model.dsp.frame_size,
        "hop_size": model.dsp.hop_size,
        "mel_bins": model.dsp.mel_bins,
        "params": model.param_count(),
        "structure": model_structure(model),
        "overall_sparsity": overall_sparsity(model),
        "ops_per_frame": ops_per_frame(model),
        "weight_hash": container.weight_hash(model),
        "footprint": fp.to_dict(),
        "speedup": estimated_speedup(model),
        "layers": layer_infos(model),
    }
