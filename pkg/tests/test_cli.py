import json

import numpy as np
import pytest

from melmask import container, dsp
from melmask.cli import main
from melmask.toys import random_model


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, speechish):
    d = tmp_path_factory.mktemp("cli")
    model = random_model(9, dims=(8, 8, 8, 8), frame_size=128)
    container.save(model, d / "toy.ssem")
    dsp.write_wav(d / "noisy.wav", speechish[:4000], 16000)
    dsp.write_wav(d / "wrong_rate.wav", speechish[:2000], 8000)
    (d / "garbage.ssem").write_bytes(b"junk")
    (d / "eval" / "noisy").mkdir(parents=True)
    (d / "eval" / "clean").mkdir(parents=True)
    rng = np.random.default_rng(0)
    clean = speechish[:2500]
    dsp.write_wav(d / "eval" / "clean" / "u0.wav", clean, 16000)
    dsp.write_wav(d / "eval" / "noisy" / "u0.wav",
                  clean + rng.normal(0, 0.02, len(clean)), 16000)
    (d / "metrics.csv").write_text("utterance,stoi,pesq\nu0,0.9,2.5\n")
    return d


def test_enhance_ok(workdir, capsys):
    rc = main(["enhance", "-m", str(workdir / "toy.ssem"),
               "-i", str(workdir / "noisy.wav"), "-o", str(workdir / "out.wav")])
    assert rc == 0
    samples, rate = dsp.read_wav(workdir / "out.wav")
    assert rate == 16000 and len(samples) > 0


def test_enhance_rate_mismatch_exit_2(workdir, capsys):
    rc = main(["enhance", "-m", str(workdir / "toy.ssem"),
               "-i", str(workdir / "wrong_rate.wav"), "-o", str(workdir / "x.wav")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "8000" in err and "16000" in err


def test_corrupt_model_exit_4(workdir):
    rc = main(["enhance", "-m", str(workdir / "garbage.ssem"),
               "-i", str(workdir / "noisy.wav"), "-o", str(workdir / "x.wav")])
    assert rc == 4


def test_usage_errors_exit_1(workdir):
    assert main(["enhance", "-m", str(workdir / "toy.ssem"),
                 "-i", str(workdir / "missing.wav"), "-o", "x.wav"]) == 1
    assert main(["prune", "-m", str(workdir / "toy.ssem"),
                 "--structure", "weight", "-o", "x.ssem"]) == 1
    assert main(["frobnicate"]) == 1  # unknown subcommand is a usage error


def test_prune_and_report(workdir):
    out = workdir / "pruned.ssem"
    rep = workdir / "prune.json"
    rc = main(["prune", "-m", str(workdir / "toy.ssem"), "--structure", "block",
               "--target", "0.5", "-o", str(out), "--report", str(rep)])
    assert rc == 0
    report = json.loads(rep.read_text())
    assert 0.5 <= report["overall_sparsity"] < 0.6
    model = container.load(out)
    assert model.param_count() == report["params_after"]


def test_prune_explicit_plan(workdir):
    rc = main(["prune", "-m", str(workdir / "toy.ssem"), "--structure", "unit",
               "--plan", "lstm1=0.25,lstm2=0.25", "-o", str(workdir / "u.ssem")])
    assert rc == 0
    rc = main(["prune", "-m", str(workdir / "toy.ssem"), "--structure", "unit",
               "--plan", "dense2=0.5", "-o", str(workdir / "v.ssem")])
    assert rc == 1


def test_prune_infeasible_exit_3(workdir, tmp_path):
    tiny = tmp_path / "tiny.ssem"
    container.save(random_model(13, dims=(8, 4, 4, 4)), tiny)
    rc = main(["prune", "-m", str(tiny), "--structure", "weight",
               "--target", "0.9", "-o", str(tmp_path / "x.ssem")])
    assert rc == 3


def test_search_command(workdir):
    rep = workdir / "search.json"
    rc = main(["search", "-m", str(workdir / "toy.ssem"), "--structure", "unit",
               "--target", "0.5", "--eval-dir", str(workdir / "eval"),
               "--metrics", str(workdir / "metrics.csv"),
               "--report", str(rep), "--save-winner", str(workdir / "winner.ssem")])
    assert rc == 0
    report = json.loads(rep.read_text())
    assert report["q_basis"] == "stoi+pesq+si_sdr"
    winner = container.load(workdir / "winner.ssem")
    assert winner.param_count() < random_model(9, dims=(8, 8, 8, 8)).param_count()


def test_report_command(workdir, capsys):
    hw = workdir / "hw.json"
    hw.write_text(json.dumps({"macs_per_cycle": 8, "clock_hz": 1e8,
                              "sram_bytes": 640 * 1024}))
    rc = main(["report", "-m", str(workdir / "toy.ssem"), "--hw", str(hw)])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["constraints"]["causal"] is True


def test_sparsity_map_command(workdir):
    rc = main(["sparsity-map", "-m", str(workdir / "toy.ssem"),
               "--layer", "lstm2", "-o", str(workdir / "map.pgm")])
    assert rc == 0
    assert (workdir / "map.pgm").read_bytes().startswith(b"P5\n")
    rc = main(["sparsity-map", "-m", str(workdir / "toy.ssem"),
               "--layer", "oops", "-o", str(workdir / "m2.pgm")])
    assert rc == 1


def test_inspect_json(workdir, capsys):
    rc = main(["inspect", "-m", str(workdir / "toy.ssem"), "--json"])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    model = container.load(workdir / "toy.ssem")
    assert payload["weight_hash"] == container.weight_hash(model)
    assert payload["params"] == model.param_count()


def test_idempotent_outputs(workdir):
    a, b = workdir / "p1.ssem", workdir / "p2.ssem"
    for out in (a, b):
        assert main(["prune", "-m", str(workdir / "toy.ssem"), "--structure",
                     "weight", "--target", "0.3", "-o", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
