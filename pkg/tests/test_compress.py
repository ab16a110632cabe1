import itertools

import numpy as np
import pytest

from melmask.analysis import q_score
from melmask.compress import (LAYER_ORDER, ArchInfo, InfeasibleTargetError,
                              InvalidPlanError, MetricSidecar, SparsityPlan,
                              balanced_plan, enumerate_plans, evaluate_si_sdr,
                              explicit_plan, group_weights, layer_group_l1,
                              load_eval_dir, prune_layer, prune_model, search)
from melmask.engine import DenseLayer, enhance
from melmask.quant import Q8, quantize_tensor
from melmask.sparse import SparsityStructure, StructureKind
from melmask.toys import random_model

WEIGHT = SparsityStructure.weight()
BLOCK = SparsityStructure.block(8)
UNIT = SparsityStructure.unit()


# -- grouping ------------------------------------------------------------------

def test_weight_groups_partition(toy_model):
    groups = group_weights(toy_model, WEIGHT)
    assert len(groups["dense1"]) == 16 * 16
    assert all(g.size == 1 for g in groups["dense1"])
    # 2x2 dense layer -> 4 groups
    small = DenseLayer(w=quantize_tensor(np.ones((2, 2)), Q8),
                       b=quantize_tensor(np.zeros(2), Q8), activation="tanh")
    assert len(layer_group_l1(small, WEIGHT)) == 4


def test_block_groups_cover_all_weights(toy_model):
    groups = group_weights(toy_model, BLOCK)
    for name, scores in groups.items():
        layer = dict(toy_model.layers())[name]
        mats = layer.matrices() if hasattr(layer, "matrices") else {"w": layer.w}
        weight_count = sum(int(np.prod(m.shape)) for m in mats.values())
        assert sum(g.size for g in scores) == weight_count
    # 4x16 matrix under 1x8 blocks -> 8 groups of 8
    small = DenseLayer(w=quantize_tensor(np.ones((4, 16)), Q8),
                       b=quantize_tensor(np.zeros(4), Q8), activation="tanh")
    l1 = layer_group_l1(small, BLOCK)
    assert len(l1) == 8


def test_lstm_unit_groups_partition_and_score(toy_model):
    layer = toy_model.lstm1
    groups = group_weights(toy_model, UNIT)["lstm1"]
    assert len(groups) == layer.hidden_size  # one group per output
    # owned parameters tile the layer exactly once
    total_owned = sum(g.size for g in groups)
    params = sum(int(np.prod(m.shape)) for m in layer.matrices().values()) \
        + sum(len(b.data) for b in layer.biases().values())
    assert total_owned == params
    # score includes rows of all 8 matrices, recurrent columns, and biases
    k = 3
    expect = 0.0
    for name, m in layer.matrices().items():
        mag = np.abs(m.dequantized())
        expect += mag[k, :].sum()
        if name in ("w_hi", "w_hf", "w_ho", "w_hc"):
            expect += mag[:, k].sum() - mag[k, k]
    for b in layer.biases().values():
        expect += abs(b.dequantized()[k])
    assert groups[k].l1 == pytest.approx(expect)


# -- layer pruning -------------------------------------------------------------

def test_prune_layer_magnitude_oracle():
    w = quantize_tensor(np.array([[0.1, -0.9], [0.5, 0.05]]), Q8)
    layer = DenseLayer(w=w, b=quantize_tensor(np.zeros(2), Q8), activation="tanh")
    masks = prune_layer(layer, WEIGHT, 0.5)
    bits = masks.matrix_masks["w"].bits
    # prunes the two smallest magnitudes: 0.05 and 0.1
    assert bits.tolist() == [[False, True], [True, False]]


def test_prune_layer_tie_break_is_deterministic():
    w = quantize_tensor(np.array([[0.25, 0.25], [0.25, 0.25]]), Q8)
    layer = DenseLayer(w=w, b=quantize_tensor(np.zeros(2), Q8), activation="tanh")
    for _ in range(3):
        bits = prune_layer(layer, WEIGHT, 0.5).matrix_masks["w"].bits
        # lower coordinates pruned first on equal scores
        assert bits.tolist() == [[False, False], [True, True]]


def test_prune_layer_zero_keeps_everything(toy_model):
    masks = prune_layer(toy_model.dense1, WEIGHT, 0.0)
    assert masks.matrix_masks["w"].bits.all()


def test_unit_prune_final_layer_forbidden(toy_model):
    with pytest.raises(InvalidPlanError):
        prune_layer(toy_model.dense2, UNIT, 0.2)


def test_kept_groups_dominate_pruned(toy_model):
    from melmask.compress import group_keep_flags
    for structure in (WEIGHT, BLOCK, UNIT):
        for name, layer in toy_model.layers():
            if structure is UNIT and name == "dense2":
                continue
            l1 = layer_group_l1(layer, structure)
            masks = prune_layer(layer, structure, 0.4)
            kept = group_keep_flags(layer, structure, masks)
            if kept.all() or not kept.any():
                continue
            assert l1[kept].min() >= l1[~kept].max() - 1e-12


# -- whole-model pruning -------------------------------------------------------

def test_all_zero_plan_round_trips(toy_model):
    plan = explicit_plan(toy_model, StructureKind.WEIGHT,
                         {n: 0.0 for n in LAYER_ORDER})
    pruned, report = prune_model(toy_model, plan)
    assert report.overall_sparsity == 0.0
    x = np.random.default_rng(0).uniform(-0.5, 0.5, 2000)
    assert np.array_equal(enhance(pruned, x), enhance(toy_model, x))


def test_unit_plan_shrinks_downstream_inputs(toy_model):
    plan = explicit_plan(toy_model, StructureKind.UNIT, {"lstm1": 0.25})
    pruned, _ = prune_model(toy_model, plan)
    k = 16 - 4  # 25% of 16 units dropped
    assert pruned.lstm1.active_hidden == k
    assert pruned.lstm2.active_input == k
    for m in pruned.lstm2.matrices().values():
        pass  # shapes validated by SeModel.validate inside prune_model
    assert len(pruned.lstm1.b_i.data) == k


def test_measured_sparsity_matches_prediction(toy_model):
    arch = ArchInfo.from_model(toy_model)
    for kind in StructureKind:
        for target in (0.1, 0.4, 0.7):
            plans = enumerate_plans(arch, kind, target)
            if not plans:
                continue
            for plan in (plans[0], plans[len(plans) // 2], plans[-1]):
                _, report = prune_model(toy_model, plan)
                assert report.overall_sparsity == pytest.approx(plan.predicted_overall, abs=1e-12)
                assert target <= report.overall_sparsity < target + 0.1


# -- plan enumeration ----------------------------------------------------------

def brute_force_plans(arch, kind, target):
    """Independent enumeration: product of grids, recount-based filter."""
    from melmask.compress import _grid_percents, _predict_after
    grid = _grid_percents(round(target * 100))
    names = [e.name for e in arch.layers]
    out = []
    for combo in itertools.product(*[
            [0] if kind is StructureKind.UNIT and n == "dense2" else grid
            for n in names]):
        pcts = dict(zip(names, combo))
        after = _predict_after(arch, kind, pcts)
        total = arch.total_params()
        overall = 1 - after / total
        if target - 1e-12 <= overall < target + 0.1 - 1e-12:
            out.append(tuple(v / 100 for v in combo))
    return sorted(out)


def test_enumerate_matches_brute_force(toy_model):
    arch = ArchInfo.from_model(toy_model)
    for kind in StructureKind:
        for target in (0.3, 0.5):
            got = [p.key() for p in enumerate_plans(arch, kind, target)]
            assert got == brute_force_plans(arch, kind, target)


def test_enumerate_respects_caps(toy_model):
    arch = ArchInfo.from_model(toy_model)
    for plan in enumerate_plans(arch, StructureKind.WEIGHT, 0.9):
        assert max(plan.per_layer.values()) <= 0.95
    for plan in enumerate_plans(arch, StructureKind.WEIGHT, 0.3):
        assert max(plan.per_layer.values()) <= 0.5


def test_enumerate_windows_are_disjoint(toy_model):
    arch = ArchInfo.from_model(toy_model)
    seen = {}
    for target in (0.3, 0.4, 0.5):
        for plan in enumerate_plans(arch, StructureKind.BLOCK, target):
            assert plan.key() not in seen, "plan appears in two target windows"
            seen[plan.key()] = target
            assert target <= plan.predicted_overall < target + 0.1


def test_single_prunable_knob():
    # single-layer view: with one effective knob the plan list is tiny
    model = random_model(21)
    arch = ArchInfo.from_model(model)
    plans = enumerate_plans(arch, StructureKind.WEIGHT, 0.9)
    assert plans  # 0.95 cap admits solutions for the top target


def test_unit_never_touches_final_layer(toy_model):
    arch = ArchInfo.from_model(toy_model)
    for target in (0.3, 0.5, 0.8):
        for plan in enumerate_plans(arch, StructureKind.UNIT, target):
            assert plan.per_layer["dense2"] == 0.0


# -- search --------------------------------------------------------------------

def synthetic_evaluator(peak):
    def ev(_model, plan):
        v = np.array(plan.key())
        si = 14.0 - 30.0 * float(np.sum((v - peak) ** 2))
        return 0.91, 2.7, si
    return ev


@pytest.fixture(scope="module")
def search_model():
    return random_model(17, dims=(8, 8, 8, 8))


@pytest.mark.parametrize("kind,target", [
    (StructureKind.WEIGHT, 0.3), (StructureKind.BLOCK, 0.3),
    (StructureKind.UNIT, 0.3), (StructureKind.UNIT, 0.5)])
def test_search_matches_brute_force_with_tiebreak(search_model, kind, target):
    ev = synthetic_evaluator(0.45)
    report = search(search_model, target, kind, evaluator=ev)
    plans = enumerate_plans(ArchInfo.from_model(search_model), kind, target)
    scored = []
    for p in plans:
        _, rep = prune_model(search_model, p)
        q = q_score(*ev(None, p))
        scored.append((-q, rep.footprint.total_bytes, p.key()))
    best = min(scored)
    assert (-report.winner.q, report.winner.footprint_total,
            report.winner.plan.key()) == best


def test_search_infeasible_target():
    # biases dominate this tiny model, so even the 95% per-layer cap cannot
    # push the parameter recount to a 0.9 overall sparsity
    model = random_model(13, dims=(8, 4, 4, 4))
    with pytest.raises(InfeasibleTargetError):
        search(model, 0.9, StructureKind.WEIGHT, evaluator=synthetic_evaluator(0.1))


def test_search_deterministic(toy_model):
    ev = synthetic_evaluator(0.5)
    a = search(toy_model, 0.4, StructureKind.BLOCK, evaluator=ev)
    b = search(toy_model, 0.4, StructureKind.BLOCK, evaluator=ev)
    assert a.to_dict() == b.to_dict()


def test_search_parallel_matches_serial(toy_model):
    ev = synthetic_evaluator(0.55)
    a = search(toy_model, 0.3, StructureKind.UNIT, evaluator=ev, max_workers=1)
    b = search(toy_model, 0.3, StructureKind.UNIT, evaluator=ev, max_workers=4)
    assert a.to_dict() == b.to_dict()


def test_search_with_audio_and_sidecar(search_model, speechish):
    rng = np.random.default_rng(5)
    noisy = speechish[:3000] + rng.normal(0, 0.02, 3000)
    eval_set = [("utt0", noisy, speechish[:3000])]
    sidecar = MetricSidecar({"utt0": (0.88, 2.4)})
    report = search(search_model, 0.5, StructureKind.UNIT, eval_set=eval_set,
                    metric_source=sidecar)
    assert report.q_basis == "stoi+pesq+si_sdr"
    assert report.winner.stoi == pytest.approx(0.88)
    report2 = search(search_model, 0.5, StructureKind.UNIT, eval_set=eval_set)
    assert report2.q_basis == "si_sdr_only"
    assert report2.winner.stoi == 0.0
    assert report2.winner.q == pytest.approx(0.6 * report2.winner.si_sdr)


def test_metric_sidecar_csv(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("utterance,stoi,pesq\nutt0,0.9,2.5\nutt1,0.8,2.2\n")
    sc = MetricSidecar.from_csv(path)
    assert sc.lookup("utt1") == (0.8, 2.2)
    with pytest.raises(KeyError):
        sc.lookup("nope")


def test_load_eval_dir(tmp_path, speechish):
    from melmask.dsp import write_wav
    (tmp_path / "noisy").mkdir()
    (tmp_path / "clean").mkdir()
    write_wav(tmp_path / "noisy" / "a.wav", speechish[:4000], 16000)
    write_wav(tmp_path / "clean" / "a.wav", speechish[:4000], 16000)
    pairs = load_eval_dir(tmp_path, 16000)
    assert len(pairs) == 1 and pairs[0][0] == "a"
    with pytest.raises(Exception):
        load_eval_dir(tmp_path, 8000)


def test_evaluate_si_sdr_perfect_model_is_high(toy_model, speechish):
    # enhancing the clean signal against itself scores decently even with a
    # random mask; just assert the helper runs and is finite
    val = evaluate_si_sdr(toy_model, speechish[:5000], speechish[:5000])
    assert np.isfinite(val)


def test_explicit_plan_validation(toy_model):
    with pytest.raises(InvalidPlanError):
        explicit_plan(toy_model, StructureKind.WEIGHT, {"lstm1": 1.5})
    plan = explicit_plan(toy_model, StructureKind.WEIGHT, {"lstm1": 0.5})
    assert plan.per_layer["dense2"] == 0.0


def test_balanced_plan_lands_in_window(toy_model):
    arch = ArchInfo.from_model(toy_model)
    for kind in StructureKind:
        for target in (0.3, 0.5, 0.7):
            plan = balanced_plan(arch, kind, target)
            _, rep = prune_model(toy_model, plan)
            assert target <= rep.overall_sparsity < target + 0.1
