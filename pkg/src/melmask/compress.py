"""Offline magnitude pruning and the per-layer sparsity combination search.

Groups are scored by the L1 norm of their dequantized weights; the lowest
scoring groups are zeroed until the layer hits its fraction. A target for
the whole model is met by enumerating per-layer fractions on a 10% grid
(capped at 20 points above the target, 95% for the high targets),
pruning each candidate, and keeping the plan with the best quality
heuristic on an evaluation set.

Unit pruning removes LSTM outputs entirely: the group for output k owns
row k of all eight gate matrices plus the four bias entries, and its score
additionally counts the recurrent columns that feed k back in. Removing it
shrinks the recurrent matrices in both axes and narrows the next layer's
input. The final dense layer is never unit-pruned so the mask width is
preserved.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import analysis
from .dsp import SampleRateMismatchError, read_wav
from .engine import (LSTM_BIAS_NAMES, LSTM_MATRIX_NAMES, DenseLayer,
                     LstmLayer, SeModel, enhance, mat_shape, ops_per_frame)
from .quant import QuantTensor
from .sparse import (PruneMask, SparseMatrix, SparsityStructure,
                     StructureKind, encode)

LAYER_ORDER = ("lstm1", "lstm2", "dense1", "dense2")
FINAL_LAYER = "dense2"
RECURRENT_NAMES = ("w_hi", "w_hf", "w_ho", "w_hc")
THREADS_ENV = "MELMASK_THREADS"


class InfeasibleTargetError(ValueError):
    """No per-layer combination reaches the requested overall sparsity."""


class InvalidPlanError(ValueError):
    pass


@dataclass(frozen=True)
class GroupScore:
    """One prunable group: identity, importance, and owned parameter count."""

    group_id: tuple
    l1: float
    size: int


@dataclass(frozen=True)
class SparsityPlan:
    structure: StructureKind
    per_layer: dict[str, float]
    predicted_overall: float

    def key(self) -> tuple:
        return tuple(self.per_layer[n] for n in LAYER_ORDER)

    def to_dict(self) -> dict:
        return {"structure": self.structure.value,
                "per_layer": dict(self.per_layer),
                "predicted_overall": self.predicted_overall}


def _dense_of(m) -> QuantTensor:
    return m.decode() if isinstance(m, SparseMatrix) else m


def _layer_mats(layer) -> dict[str, QuantTensor]:
    if isinstance(layer, LstmLayer):
        return {n: _dense_of(getattr(layer, n)) for n in LSTM_MATRIX_NAMES}
    return {"w": _dense_of(layer.w)}


def _segments(mats: dict[str, QuantTensor], structure: SparsityStructure):
    """(name, shape, group count) per matrix, in canonical order."""
    out = []
    for name, m in mats.items():
        r, c = m.shape
        if structure.kind is StructureKind.WEIGHT:
            out.append((name, (r, c), r * c))
        else:
            out.append((name, (r, c), r * (-(-c // structure.block_w))))
    return out


def layer_group_l1(layer, structure: SparsityStructure) -> np.ndarray:
    """Group importance scores in coordinate order, one flat array per layer.

    Coordinate order: matrices in canonical order, groups row-major within
    each; for unit structure one entry per output index.
    """
    mats = _layer_mats(layer)
    if structure.kind is StructureKind.WEIGHT:
        return np.concatenate([np.abs(m.dequantized()).ravel() for m in mats.values()])
    if structure.kind is StructureKind.BLOCK:
        bw = structure.block_w
        parts = []
        for m in mats.values():
            mag = np.abs(m.dequantized())
            r, c = m.shape
            nb = -(-c // bw)
            pad = np.zeros((r, nb * bw))
            pad[:, :c] = mag
            parts.append(pad.reshape(r, nb, bw).sum(axis=2).ravel())
        return np.concatenate(parts)
    if isinstance(layer, LstmLayer):
        l1 = np.zeros(layer.hidden_size)
        for name, m in mats.items():
            mag = np.abs(m.dequantized())
            l1 += mag.sum(axis=1)
            if name in RECURRENT_NAMES:
                # feedback columns; the diagonal is already counted in the row
                l1 += mag.sum(axis=0) - np.diag(mag)
        for b in layer.biases().values():
            l1 += np.abs(b.dequantized())
        return l1
    return np.abs(mats["w"].dequantized()).sum(axis=1) + np.abs(layer.b.dequantized())


def group_weights(model: SeModel, structure: SparsityStructure) -> dict[str, list[GroupScore]]:
    """Importance table for every prunable group, per layer."""
    out = {}
    for lname, layer in model.layers():
        l1 = layer_group_l1(layer, structure)
        mats = _layer_mats(layer)
        scores = []
        if structure.kind is StructureKind.WEIGHT:
            ids = ((name, i // m.shape[1], i % m.shape[1])
                   for name, m in mats.items() for i in range(int(np.prod(m.shape))))
            scores = [GroupScore(g, float(v), 1) for g, v in zip(ids, l1)]
        elif structure.kind is StructureKind.BLOCK:
            bw = structure.block_w
            pos = 0
            for name, m in mats.items():
                r, c = m.shape
                nb = -(-c // bw)
                real = np.minimum(c - np.arange(nb) * bw, bw)
                for i in range(r):
                    for b in range(nb):
                        scores.append(GroupScore((name, i, b), float(l1[pos]), int(real[b])))
                        pos += 1
        else:
            if isinstance(layer, LstmLayer):
                owned = 4 * layer.input_size + 4 * layer.hidden_size + 4
            else:
                owned = mats["w"].shape[1] + 1
            scores = [GroupScore((k,), float(v), owned) for k, v in enumerate(l1)]
        out[lname] = scores
    return out


def _floor_fraction(fraction: float, n: int) -> int:
    """floor(fraction * n), robust to float representation of x/100 grids."""
    return math.floor(round(fraction * n, 9))


def _pruned_group_index(l1: np.ndarray, fraction: float) -> np.ndarray:
    """Indices of the lowest-L1 groups, ties broken by coordinate order."""
    n_prune = _floor_fraction(fraction, len(l1))
    order = np.lexsort((np.arange(len(l1)), l1))  # stable: coordinate breaks ties
    return np.sort(order[:n_prune])


@dataclass
class LayerMasks:
    """Keep/drop decisions for one layer under one structure."""

    matrix_masks: dict[str, PruneMask]
    kept_units: np.ndarray | None = None  # unit structure only


def group_keep_flags(layer, structure: SparsityStructure, masks: LayerMasks) -> np.ndarray:
    """Per-group survival flags in coordinate order (see layer_group_l1)."""
    mats = _layer_mats(layer)
    if structure.kind is StructureKind.UNIT:
        n = len(layer_group_l1(layer, structure))
        flags = np.zeros(n, dtype=bool)
        flags[masks.kept_units] = True
        return flags
    parts = []
    for name, (rows, cols), groups in _segments(mats, structure):
        bits = masks.matrix_masks[name].bits
        if structure.kind is StructureKind.WEIGHT:
            parts.append(bits.ravel())
        else:
            bw = structure.block_w
            nb = groups // rows
            pad = np.zeros((rows, nb * bw), dtype=bool)
            pad[:, :cols] = bits
            parts.append(pad.reshape(rows, nb, bw).any(axis=2).ravel())
    return np.concatenate(parts)


def prune_layer(layer, structure: SparsityStructure, sparsity: float) -> LayerMasks:
    """Magnitude-prune one layer to a group fraction; deterministic."""
    if not 0.0 <= sparsity < 1.0:
        raise InvalidPlanError("layer sparsity must be in [0, 1)")
    if structure.kind is StructureKind.UNIT and isinstance(layer, DenseLayer) \
            and layer.activation == "sigmoid":
        raise InvalidPlanError("the final layer is excluded from unit pruning")
    mats = _layer_mats(layer)
    l1 = layer_group_l1(layer, structure)
    pruned = _pruned_group_index(l1, sparsity)
    if structure.kind is StructureKind.UNIT:
        keep = np.setdiff1d(np.arange(len(l1)), pruned)
        if len(keep) == 0:
            raise InvalidPlanError("unit pruning would remove every output")
        return LayerMasks({}, kept_units=keep)
    masks = {}
    offset = 0
    for name, (rows, cols), groups in _segments(mats, structure):
        local = pruned[(pruned >= offset) & (pruned < offset + groups)] - offset
        if structure.kind is StructureKind.WEIGHT:
            bits = np.ones(rows * cols, dtype=bool)
            bits[local] = False
            masks[name] = PruneMask(rows, cols, bits.reshape(rows, cols))
        else:
            bw = structure.block_w
            nb = groups // rows
            bits = np.ones((rows, nb * bw), dtype=bool)
            bits.reshape(rows, nb, bw)[local // nb, local % nb, :] = False
            masks[name] = PruneMask(rows, cols, bits[:, :cols])
        offset += groups
    return LayerMasks(masks)


@dataclass(frozen=True)
class PruneReport:
    plan: SparsityPlan
    params_before: int
    params_after: int
    per_layer_sparsity: dict[str, float]
    overall_sparsity: float
    ops_per_frame_before: int
    ops_per_frame_after: int
    footprint: analysis.FootprintEstimate
    speedup: float

    def to_dict(self) -> dict:
        return {"plan": self.plan.to_dict(),
                "params_before": self.params_before,
                "params_after": self.params_after,
                "per_layer_sparsity": dict(self.per_layer_sparsity),
                "overall_sparsity": self.overall_sparsity,
                "ops_per_frame_before": self.ops_per_frame_before,
                "ops_per_frame_after": self.ops_per_frame_after,
                "footprint": self.footprint.to_dict(),
                "speedup": self.speedup}


def _layer_param_count(layer) -> int:
    n = 0
    if isinstance(layer, LstmLayer):
        mats = layer.matrices().values()
        biases = layer.biases().values()
    else:
        mats, biases = [layer.w], [layer.b]
    for m in mats:
        n += m.stored_weight_count() if isinstance(m, SparseMatrix) else int(np.prod(m.shape))
    for b in biases:
        n += len(b.data)
    return n


def _encode_lstm_masks(layer: LstmLayer, masks: LayerMasks,
                       structure: SparsityStructure) -> LstmLayer:
    new = {}
    for name in LSTM_MATRIX_NAMES:
        dense = _dense_of(getattr(layer, name))
        new[name] = encode(dense, masks.matrix_masks[name], structure)
    for bname in LSTM_BIAS_NAMES:
        new[bname] = getattr(layer, bname)
    return LstmLayer(**new)


def _unit_masked(dense: QuantTensor, keep_rows: np.ndarray | None,
                 keep_cols: np.ndarray | None):
    rows, cols = dense.shape
    kr = np.zeros(rows, dtype=bool)
    kr[keep_rows if keep_rows is not None else np.arange(rows)] = True
    kc = np.zeros(cols, dtype=bool)
    kc[keep_cols if keep_cols is not None else np.arange(cols)] = True
    if kr.all() and kc.all():
        return dense
    return encode(dense, PruneMask(rows, cols, np.outer(kr, kc)), SparsityStructure.unit())


def _take_bias(b: QuantTensor, keep: np.ndarray | None) -> QuantTensor:
    if keep is None:
        return b
    return QuantTensor(np.asarray(b.data)[keep], b.fmt)


def prune_model(model: SeModel, plan: SparsityPlan) -> tuple[SeModel, PruneReport]:
    """Apply a plan and re-encode every touched layer in its sparse format."""
    structure = {StructureKind.WEIGHT: SparsityStructure.weight(),
                 StructureKind.BLOCK: SparsityStructure.block(),
                 StructureKind.UNIT: SparsityStructure.unit()}[plan.structure]
    missing = [n for n, _ in model.layers() if n not in plan.per_layer]
    if missing:
        raise InvalidPlanError(f"plan is missing layers {missing}")
    if plan.structure is StructureKind.UNIT and plan.per_layer[FINAL_LAYER] > 0:
        raise InvalidPlanError("the final layer is excluded from unit pruning")

    before = model.param_count()
    ops_before = ops_per_frame(model)
    layers_before = {n: _layer_param_count(l) for n, l in model.layers()}
    new_layers: dict[str, LstmLayer | DenseLayer] = {}

    if plan.structure in (StructureKind.WEIGHT, StructureKind.BLOCK):
        for name, layer in model.layers():
            frac = plan.per_layer[name]
            if frac == 0.0:
                new_layers[name] = layer
                continue
            masks = prune_layer(layer, structure, frac)
            if isinstance(layer, LstmLayer):
                new_layers[name] = _encode_lstm_masks(layer, masks, structure)
            else:
                new_layers[name] = replace(layer, w=encode(_dense_of(layer.w),
                                                           masks.matrix_masks["w"], structure))
    else:
        kept: dict[str, np.ndarray | None] = {}
        for name, layer in model.layers():
            frac = plan.per_layer[name]
            kept[name] = None if frac == 0.0 else prune_layer(layer, structure, frac).kept_units
        upstream = {"lstm1": None, "lstm2": kept["lstm1"],
                    "dense1": kept["lstm2"], "dense2": kept["dense1"]}
        for name, layer in model.layers():
            rows, cols = kept[name], upstream[name]
            if isinstance(layer, LstmLayer):
                mats = {}
                for mname in LSTM_MATRIX_NAMES:
                    in_keep = rows if mname in RECURRENT_NAMES else cols
                    mats[mname] = _unit_masked(_dense_of(getattr(layer, mname)), rows, in_keep)
                for bname in LSTM_BIAS_NAMES:
                    mats[bname] = _take_bias(getattr(layer, bname), rows)
                new_layers[name] = LstmLayer(**mats)
            else:
                new_layers[name] = replace(layer, w=_unit_masked(_dense_of(layer.w), rows, cols),
                                           b=_take_bias(layer.b, rows))

    pruned = SeModel(dsp=model.dsp, fb=model.fb, qeq=model.qeq,
                     lstm1=new_layers["lstm1"], lstm2=new_layers["lstm2"],
                     dense1=new_layers["dense1"], dense2=new_layers["dense2"])
    pruned.validate()
    after = pruned.param_count()
    overall = 1.0 - after / before
    per_layer = {n: 1.0 - _layer_param_count(l) / layers_before[n]
                 for n, l in pruned.layers()}
    report = PruneReport(
        plan=plan, params_before=before, params_after=after,
        per_layer_sparsity=per_layer, overall_sparsity=overall,
        ops_per_frame_before=ops_before, ops_per_frame_after=ops_per_frame(pruned),
        footprint=analysis.estimate_footprint(pruned),
        speedup=analysis.estimate_speedup(plan.structure, overall),
    )
    return pruned, report


# -- plan enumeration ---------------------------------------------------------

@dataclass(frozen=True)
class ArchLayer:
    name: str
    kind: str  # "lstm" or "dense"
    out_size: int
    in_size: int
    weight_count: int
    group_count: dict  # StructureKind -> int


@dataclass(frozen=True)
class ArchInfo:
    layers: tuple[ArchLayer, ...]

    @staticmethod
    def from_model(model: SeModel) -> "ArchInfo":
        entries = []
        for name, layer in model.layers():
            mats = _layer_mats(layer)
            weight_count = sum(int(np.prod(m.shape)) for m in mats.values())
            blocks = sum(m.shape[0] * (-(-m.shape[1] // 8)) for m in mats.values())
            if isinstance(layer, LstmLayer):
                entries.append(ArchLayer(name, "lstm", layer.hidden_size, layer.input_size,
                                         weight_count,
                                         {StructureKind.WEIGHT: weight_count,
                                          StructureKind.BLOCK: blocks,
                                          StructureKind.UNIT: layer.hidden_size}))
            else:
                r, c = mat_shape(layer.w)
                entries.append(ArchLayer(name, "dense", r, c, weight_count,
                                         {StructureKind.WEIGHT: weight_count,
                                          StructureKind.BLOCK: blocks,
                                          StructureKind.UNIT: r}))
        return ArchInfo(tuple(entries))

    def total_params(self) -> int:
        total = 0
        for e in self.layers:
            total += e.weight_count
            total += 4 * e.out_size if e.kind == "lstm" else e.out_size
        return total


def _grid_percents(target_pct: int) -> list[int]:
    cap = 95 if target_pct >= 80 else target_pct + 20
    vals = [v for v in range(0, 100, 10) if v <= cap]
    if cap == 95:
        vals.append(95)
    return vals


def _params_after_unit(arch: ArchInfo, kept: dict[str, int]) -> int:
    total = 0
    prev = arch.layers[0].in_size
    for e in arch.layers:
        k = kept[e.name]
        if e.kind == "lstm":
            total += 4 * k * prev + 4 * k * k + 4 * k
        else:
            total += k * prev + k
        prev = k
    return total


def _predict_after(arch: ArchInfo, structure: StructureKind, pcts: dict[str, int]) -> int:
    if structure is StructureKind.UNIT:
        # floor(p% of n) in exact integer arithmetic
        kept = {e.name: e.out_size - (pcts[e.name] * e.out_size) // 100 for e in arch.layers}
        return _params_after_unit(arch, kept)
    total = arch.total_params()
    for e in arch.layers:
        groups = e.group_count[structure]
        g_size = 1 if structure is StructureKind.WEIGHT else 8
        total -= ((pcts[e.name] * groups) // 100) * g_size
    return total


def enumerate_plans(arch: ArchInfo, structure: StructureKind, target: float,
                    step: float = 0.1) -> list[SparsityPlan]:
    """All per-layer grids whose predicted overall sparsity lands in
    [target, target + step), in lexicographic order."""
    target_pct = round(target * 100)
    step_pct = round(step * 100)
    if target_pct not in range(10, 100, 10):
        raise ValueError("target must be one of 0.1 .. 0.9")
    grid = _grid_percents(target_pct)
    names = [e.name for e in arch.layers]
    per_layer_grid = [grid if not (structure is StructureKind.UNIT and n == FINAL_LAYER)
                      else [0] for n in names]
    total = arch.total_params()
    plans = []

    def rec(i, chosen):
        if i == len(names):
            pcts = dict(zip(names, chosen))
            after = _predict_after(arch, structure, pcts)
            # overall in [target, target+step), compared in exact integers
            if after * 100 <= (100 - target_pct) * total and \
               after * 100 > (100 - target_pct - step_pct) * total:
                plans.append(SparsityPlan(
                    structure=structure,
                    per_layer={n: p / 100.0 for n, p in pcts.items()},
                    predicted_overall=1.0 - after / total))
            return
        for v in per_layer_grid[i]:
            rec(i + 1, chosen + [v])

    rec(0, [])
    plans.sort(key=lambda p: p.key())
    return plans


# -- evaluation and search ----------------------------------------------------

class MetricSidecar:
    """Externally computed intelligibility/quality scores per utterance."""

    def __init__(self, table: dict[str, tuple[float, float]]):
        self.table = dict(table)

    @staticmethod
    def from_csv(path) -> "MetricSidecar":
        table = {}
        with open(path, newline="") as f:
            for row in csv.reader(f):
                if not row or row[0].strip().lower() in ("utterance", "id", "utt"):
                    continue
                if len(row) < 3:
                    raise ValueError("metric rows must be: utterance, stoi, pesq")
                table[row[0].strip()] = (float(row[1]), float(row[2]))
        return MetricSidecar(table)

    def lookup(self, utt_id: str) -> tuple[float, float]:
        if utt_id not in self.table:
            raise KeyError(f"no externally computed metrics for {utt_id!r}")
        return self.table[utt_id]


EvalSet = list[tuple[str, np.ndarray, np.ndarray]]  # (utterance id, noisy, clean)


def load_eval_dir(path, expected_rate: int) -> EvalSet:
    """Load noisy/clean WAV pairs from <path>/noisy and <path>/clean."""
    noisy_dir = os.path.join(path, "noisy")
    clean_dir = os.path.join(path, "clean")
    if not os.path.isdir(noisy_dir) or not os.path.isdir(clean_dir):
        raise FileNotFoundError("evaluation directory needs noisy/ and clean/ subfolders")
    out: EvalSet = []
    for name in sorted(os.listdir(noisy_dir)):
        if not name.endswith(".wav"):
            continue
        noisy, rate_n = read_wav(os.path.join(noisy_dir, name))
        clean, rate_c = read_wav(os.path.join(clean_dir, name))
        if rate_n != expected_rate or rate_c != expected_rate:
            raise SampleRateMismatchError(
                f"{name}: expected {expected_rate} Hz, got {rate_n}/{rate_c}")
        out.append((os.path.splitext(name)[0], noisy, clean))
    if not out:
        raise FileNotFoundError("no WAV pairs found")
    return out


def evaluate_si_sdr(model: SeModel, noisy: np.ndarray, clean: np.ndarray) -> float:
    """Enhance and score against the clean reference, skipping the warmup edge."""
    out = enhance(model, noisy)
    lo = model.dsp.frame_size
    if len(out) <= lo:
        raise ValueError("utterance too short to score")
    return analysis.si_sdr(clean[lo : len(out)], out[lo : len(out)])


@dataclass(frozen=True)
class PlanEval:
    plan: SparsityPlan
    stoi: float
    pesq: float
    si_sdr: float
    q: float
    overall_sparsity: float
    footprint_total: int
    speedup: float

    def to_dict(self) -> dict:
        return {"plan": self.plan.to_dict(), "stoi": self.stoi, "pesq": self.pesq,
                "si_sdr": self.si_sdr, "q": self.q,
                "overall_sparsity": self.overall_sparsity,
                "footprint_total": self.footprint_total, "speedup": self.speedup}


@dataclass(frozen=True)
class SearchReport:
    structure: StructureKind
    target: float
    q_basis: str  # "stoi+pesq+si_sdr" or "si_sdr_only"
    evals: tuple[PlanEval, ...]
    winner_index: int

    @property
    def winner(self) -> PlanEval:
        return self.evals[self.winner_index]

    def to_dict(self) -> dict:
        return {"structure": self.structure.value, "target": self.target,
                "q_basis": self.q_basis,
                "plans_evaluated": len(self.evals),
                "evals": [e.to_dict() for e in self.evals],
                "winner_index": self.winner_index,
                "winner": self.winner.to_dict()}


def _default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return 1


def search(model: SeModel, target: float, structure: StructureKind,
           eval_set: EvalSet | None = None,
           metric_source: MetricSidecar | None = None,
           evaluator=None, max_workers: int | None = None) -> SearchReport:
    """Prune every feasible plan, evaluate, and pick the best Q.

    ``evaluator(pruned_model, plan) -> (stoi, pesq, si_sdr)`` overrides the
    default evaluation (useful for synthetic oracles); otherwise SI-SDR is
    measured on ``eval_set`` and STOI/PESQ come from ``metric_source`` or
    count as zero with the Q basis downgraded. Ties break toward the
    smaller footprint, then the lexicographically earlier plan.
    """
    arch = ArchInfo.from_model(model)
    plans = enumerate_plans(arch, structure, target)
    if not plans:
        raise InfeasibleTargetError(
            f"no {structure.value} plan reaches overall sparsity {target}")
    if evaluator is None and not eval_set:
        raise ValueError("need an evaluation set (or an explicit evaluator)")
    q_basis = "stoi+pesq+si_sdr" if (evaluator or metric_source) else "si_sdr_only"

    def run(plan: SparsityPlan) -> PlanEval:
        pruned, report = prune_model(model, plan)
        if evaluator is not None:
            stoi, pesq, sisdr = evaluator(pruned, plan)
        else:
            sis, stois, pesqs = [], [], []
            for utt_id, noisy, clean in eval_set:
                sis.append(evaluate_si_sdr(pruned, noisy, clean))
                if metric_source is not None:
                    s, p = metric_source.lookup(utt_id)
                    stois.append(s)
                    pesqs.append(p)
            sisdr = float(np.mean(sis))
            stoi = float(np.mean(stois)) if stois else 0.0
            pesq = float(np.mean(pesqs)) if pesqs else 0.0
        return PlanEval(plan=plan, stoi=stoi, pesq=pesq, si_sdr=sisdr,
                        q=analysis.q_score(stoi, pesq, sisdr),
                        overall_sparsity=report.overall_sparsity,
                        footprint_total=report.footprint.total_bytes,
                        speedup=report.speedup)

    workers = max_workers if max_workers is not None else _default_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            evals = tuple(pool.map(run, plans))
    else:
        evals = tuple(run(p) for p in plans)
    winner = min(range(len(evals)),
                 key=lambda i: (-evals[i].q, evals[i].footprint_total, evals[i].plan.key()))
    return SearchReport(structure=structure, target=target, q_basis=q_basis,
                        evals=evals, winner_index=winner)


def balanced_plan(arch: ArchInfo, structure: StructureKind, target: float) -> SparsityPlan:
    """The feasible plan with the most even per-layer spread (for cmd-line
    pruning without a search)."""
    plans = enumerate_plans(arch, structure, target)
    if not plans:
        raise InfeasibleTargetError(
            f"no {structure.value} plan reaches overall sparsity {target}")
    return min(plans, key=lambda p: (max(p.per_layer.values()) - min(
        v for n, v in p.per_layer.items()
        if not (structure is StructureKind.UNIT and n == FINAL_LAYER)), p.key()))


def explicit_plan(model: SeModel, structure: StructureKind,
                  per_layer: dict[str, float]) -> SparsityPlan:
    """Wrap user-supplied per-layer fractions into a plan."""
    fractions = {n: float(per_layer.get(n, 0.0)) for n in LAYER_ORDER}
    for n, v in fractions.items():
        if not 0.0 <= v < 1.0:
            raise InvalidPlanError(f"{n}: fraction {v} outside [0, 1)")
    arch = ArchInfo.from_model(model)
    pcts = {n: round(v * 100) for n, v in fractions.items()}
    exact = all(abs(pcts[n] - fractions[n] * 100) < 1e-9 for n in fractions)
    if exact:
        after = _predict_after(arch, structure, pcts)
        predicted = 1.0 - after / arch.total_params()
    else:
        predicted = float("nan")
    return SparsityPlan(structure=structure, per_layer=fractions,
                        predicted_overall=predicted)
