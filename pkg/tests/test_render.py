import numpy as np
import pytest

from melmask.compress import explicit_plan, prune_model
from melmask.render import (UnknownLayerError, encode_pgm, sparsity_bitmap)
from melmask.sparse import StructureKind


def test_dense_layer_is_all_white(toy_model):
    img = sparsity_bitmap(toy_model, "dense1")
    assert img.shape == (16, 16)
    assert (img == 255).all()


def test_unknown_layer(toy_model):
    with pytest.raises(UnknownLayerError):
        sparsity_bitmap(toy_model, "conv9")


def test_pgm_header(toy_model):
    data = encode_pgm(sparsity_bitmap(toy_model, "lstm1"))
    assert data.startswith(b"P5\n48 64\n255\n")
    assert len(data) == len(b"P5\n48 64\n255\n") + 48 * 64


def test_block_pruned_black_runs_are_multiples_of_eight(toy_model):
    plan = explicit_plan(toy_model, StructureKind.BLOCK, {"dense2": 0.5})
    pruned, _ = prune_model(toy_model, plan)
    img = sparsity_bitmap(pruned, "dense2")
    assert (img == 0).any()
    for row in img:
        # run lengths of black pixels along each row
        padded = np.concatenate([[255], row, [255]])
        flips = np.flatnonzero(np.diff(padded == 0))
        runs = flips[1::2] - flips[0::2]
        assert all(r % 8 == 0 for r in runs)


def test_unit_pruned_lstm_shows_rows_and_recurrent_columns(toy_model):
    plan = explicit_plan(toy_model, StructureKind.UNIT, {"lstm1": 0.5})
    pruned, _ = prune_model(toy_model, plan)
    img = sparsity_bitmap(pruned, "lstm1")
    h, inp = 16, 32
    kept = np.asarray(pruned.lstm1.w_xi.kept_rows)
    dropped = sorted(set(range(h)) - set(kept.tolist()))
    for gate in range(4):
        band = img[gate * h : (gate + 1) * h]
        for r in dropped:
            assert (band[r] == 0).all()          # whole row removed
        rec = band[:, inp:]
        for r in dropped:
            assert (rec[:, r] == 0).all()        # feedback column removed
        for r in kept:
            assert (band[r, :inp] == 255).all()  # kept rows stay intact
