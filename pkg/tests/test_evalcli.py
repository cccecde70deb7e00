import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from protofuse.ablation import VARIANTS, format_table, run_ablation
from protofuse.cli import main
from protofuse.dataio import save_config, save_dataset, split_samples
from protofuse.errors import ConfigError, ContractError
from protofuse.evaluation import (
    MaskSpec,
    apply_mask,
    compute_metrics,
    eval_masked,
    evaluate,
    extract_traces,
    seven_class,
)
from protofuse.model import build_variant

from conftest import small_config, synth

scores = st.floats(-3, 3, allow_nan=False)


# -- metrics

def test_perfect_predictions():
    y = np.array([-2.5, -0.4, 0.0, 1.2, 3.0])
    r = compute_metrics(y, y)
    assert r.mae == 0.0 and r.corr == pytest.approx(1.0) and r.corr_defined
    assert r.acc7 == r.acc2_nn == r.acc2_np == r.f1_nn == r.f1_np == 1.0


def test_seven_class_golden():
    r = compute_metrics([0.5, -0.5, 2.4], [1.0, -1.0, 3.0])
    assert r.mae == pytest.approx(0.5333333333333333, abs=1e-15)
    assert r.acc7 == pytest.approx(2 / 3, abs=1e-15)
    assert list(seven_class([0.5, -0.5, 2.4])) == [1, -1, 2]


def test_nn_np_golden():
    r = compute_metrics([-0.2, 0.1, 1.0], [-1.0, 0.0, 2.0])
    assert (r.acc2_nn, r.n) == (1.0, 3)
    assert (r.acc2_np, r.n_np) == (1.0, 2)


def test_nn_and_np_split_on_zero_labels():
    # a zero label predicted negative counts against NN but is excluded from NP
    r = compute_metrics([-0.5, -1.0, 1.0], [0.0, -1.0, 1.0])
    assert r.acc2_nn == pytest.approx(2 / 3)
    assert r.acc2_np == 1.0


@pytest.mark.parametrize("preds,labels", [([1.0, 1.0, 1.0], [0.0, 1.0, 2.0]),
                                          ([0.0, 1.0, 2.0], [2.0, 2.0, 2.0])])
def test_constant_input_correlation_is_flagged_zero(preds, labels):
    r = compute_metrics(preds, labels)
    assert r.corr == 0.0 and not r.corr_defined


def test_three_class_for_unit_range():
    r = compute_metrics([-0.5, 0.2, 0.9, 0.3], [-0.8, 0.0, 0.6, 0.5], score_range=(-1.0, 1.0))
    assert r.acc7 is None
    assert r.acc3 == pytest.approx(0.75)


def test_metric_contract_errors():
    with pytest.raises(ContractError):
        compute_metrics([], [])
    with pytest.raises(ContractError):
        compute_metrics([1.0], [1.0, 2.0])


def test_weighted_f1_against_hand_count():
    # NN classes: labels (neg, neg, pos, pos), preds (neg, pos, pos, pos)
    r = compute_metrics([-1.0, 1.0, 1.0, 1.0], [-1.0, -2.0, 1.0, 2.0])
    f1_neg = 2 * 1.0 * 0.5 / 1.5
    f1_pos = 2 * (2 / 3) * 1.0 / (2 / 3 + 1.0)
    assert r.f1_nn == pytest.approx(0.5 * f1_neg + 0.5 * f1_pos)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 12, elements=st.floats(-10, 10, allow_nan=False)))
def test_seven_bins_cover_every_value(x):
    assert set(seven_class(x)) <= set(range(-3, 4))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 10, elements=scores), arrays(np.float64, 10, elements=scores))
def test_report_ranges(p, y):
    r = compute_metrics(p, y)
    assert r.mae >= 0 and -1.0 <= r.corr <= 1.0
    for v in (r.acc7, r.acc2_nn, r.acc2_np, r.f1_nn, r.f1_np):
        assert 0.0 <= v <= 1.0


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 10, elements=scores),
       arrays(np.float64, 10, elements=scores.filter(lambda v: v != 0)))
def test_nn_equals_np_without_zero_labels(p, y):
    r = compute_metrics(p, y)
    assert r.acc2_nn == r.acc2_np and r.f1_nn == r.f1_np


def test_metrics_are_order_independent(rng):
    p, y = rng.uniform(-3, 3, 50), rng.uniform(-3, 3, 50)
    perm = rng.permutation(50)
    a, b = compute_metrics(p, y), compute_metrics(p[perm], y[perm])
    for k, v in a.to_dict().items():
        assert b.to_dict()[k] == pytest.approx(v, abs=1e-9)


# -- masking

def test_mask_spec_parsing():
    assert MaskSpec.parse("").modalities == frozenset()
    assert MaskSpec.parse("t,a").modalities == {"text", "audio"}
    assert MaskSpec.parse("v").remaining == ("text", "audio")
    with pytest.raises(ConfigError):
        MaskSpec.parse("t,a,v")
    with pytest.raises(ConfigError):
        MaskSpec.parse("x")


@pytest.fixture(scope="module")
def model_and_data():
    manifest, samples = synth(n_train=16, n_valid=4, n_test=10)
    return build_variant(small_config(), manifest.widths), manifest, samples


def test_mask_zeroes_features_and_keeps_lengths(model_and_data):
    _, _, samples = model_and_data
    masked = apply_mask(samples[:3], MaskSpec.parse("a"))
    for s, m in zip(samples, masked):
        assert m.audio.shape == s.audio.shape and not m.audio.any()
        assert m.text is s.text


def test_empty_mask_equals_plain_evaluation(model_and_data):
    model, manifest, samples = model_and_data
    assert eval_masked(model, manifest, samples, MaskSpec()) == evaluate(model, manifest, samples)


def test_text_only_still_predicts(model_and_data):
    model, manifest, samples = model_and_data
    r = eval_masked(model, manifest, samples, MaskSpec.parse("a,v"))
    assert r.n == 10 and np.isfinite(r.mae)


# -- traces

def test_trace_records(model_and_data, tmp_path):
    model, manifest, samples = model_and_data
    records = extract_traces(model, manifest, samples, tmp_path / "t.jsonl", plot_dir=tmp_path / "plots")
    lines = [json.loads(x) for x in (tmp_path / "t.jsonl").read_text().splitlines()]
    assert len(lines) == len(records) == len(split_samples(manifest, samples, "test"))
    for rec in lines:
        assert set(rec) == {"id", "label", "prediction", "gates", "alpha"}
        g, a = np.array(rec["gates"]), np.array(rec["alpha"])
        assert g.shape == (2, 3) and np.all((g > 0) & (g < 1))
        assert a.shape == (4, 3)
        np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-6)
    plots = sorted(p.name for p in (tmp_path / "plots").iterdir())
    assert plots == ["gates_layer1.svg", "gates_layer2.svg"]
    assert (tmp_path / "plots" / "gates_layer1.svg").read_text().startswith("<svg")


def test_four_layer_traces(tmp_path):
    manifest, samples = synth(n_train=4, n_valid=0, n_test=3)
    model = build_variant(small_config(layers=4), manifest.widths)
    records = extract_traces(model, manifest, samples, tmp_path / "t.jsonl")
    assert all(len(r["gates"]) == 4 for r in records)


def test_trace_to_unwritable_path(model_and_data, tmp_path):
    model, manifest, samples = model_and_data
    with pytest.raises(OSError):
        extract_traces(model, manifest, samples, tmp_path / "missing" / "t.jsonl")


# -- ablation harness

def test_ablation_table_shape():
    manifest, samples = synth(n_train=8, n_valid=4, n_test=4)
    rows = run_ablation(small_config(d=8, K=2, layers=1, total_steps=2, warmup_steps=1),
                        manifest, samples)
    assert [r.variant for r in rows] == list(VARIANTS)
    assert all(r.delta_ok for r in rows)
    table = format_table(rows).splitlines()
    assert len(table) == 2 + 6
    assert "Acc-2 (NN/NP)" in table[0]


# -- command line

@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    manifest, samples = synth(n_train=16, n_valid=4, n_test=6)
    save_dataset(root / "data", manifest, samples)
    save_config(small_config(d=8, K=2, layers=1, total_steps=6, warmup_steps=2), root / "cfg.json")
    return root


def _cli(*args):
    return main([str(a) for a in args])


def test_cli_train_eval_trace(workspace, capsys):
    w = workspace
    assert _cli("train", "--config", w / "cfg.json", "--data", w / "data", "--out", w / "m.ckpt") == 0
    assert (w / "m.ckpt").exists() and (w / "m.ckpt.last").exists()
    capsys.readouterr()
    assert _cli("eval", "--ckpt", w / "m.ckpt", "--data", w / "data", "--report", w / "r.jsonl") == 0
    first = capsys.readouterr().out
    assert _cli("eval", "--ckpt", w / "m.ckpt", "--data", w / "data", "--report", w / "r.jsonl") == 0
    assert capsys.readouterr().out == first
    reports = [json.loads(x) for x in (w / "r.jsonl").read_text().splitlines()]
    assert reports[0] == reports[1] and reports[0]["kind"] == "eval"
    assert _cli("eval-masked", "--ckpt", w / "m.ckpt", "--data", w / "data", "--mask", "t,a") == 0
    assert _cli("trace", "--ckpt", w / "m.ckpt", "--data", w / "data", "--out", w / "t.jsonl") == 0
    assert len((w / "t.jsonl").read_text().splitlines()) == 6


def test_cli_resume_matches_single_run(workspace):
    w = workspace
    assert _cli("train", "--config", w / "cfg.json", "--data", w / "data", "--out", w / "a.ckpt") == 0
    assert _cli("train", "--config", w / "cfg.json", "--data", w / "data", "--out", w / "b.ckpt",
                "--until", 3) == 0
    assert _cli("train", "--resume", w / "b.ckpt.last", "--data", w / "data", "--out", w / "b.ckpt") == 0
    assert (w / "a.ckpt.log.jsonl").read_text() == (w / "b.ckpt.log.jsonl").read_text()
    assert (w / "a.ckpt.last").read_bytes() == (w / "b.ckpt.last").read_bytes()


def test_cli_gen_data(tmp_path):
    (tmp_path / "gen.json").write_text(json.dumps({"seed": 2, "n_train": 3, "n_valid": 1, "n_test": 1}))
    assert _cli("gen-data", "--spec", tmp_path / "gen.json", "--out", tmp_path / "d") == 0
    assert len((tmp_path / "d" / "samples.jsonl").read_text().splitlines()) == 5


def test_cli_exit_codes(workspace, capsys):
    w = workspace
    with pytest.raises(SystemExit) as info:
        _cli("eval", "--frobnicate")
    assert info.value.code == 2
    assert _cli("eval-masked", "--ckpt", w / "m.ckpt", "--data", w / "data", "--mask", "t,a,v") == 2
    assert _cli("eval", "--ckpt", w / "missing.ckpt", "--data", w / "data") == 1
    assert _cli("train", "--data", w / "data", "--out", w / "x.ckpt") == 2


def test_cli_ablate(workspace, capsys):
    w = workspace
    assert _cli("ablate", "--config", w / "cfg.json", "--data", w / "data", "--report", w / "ab.jsonl") == 0
    rows = [json.loads(x) for x in (w / "ab.jsonl").read_text().splitlines()]
    assert [r["variant"] for r in rows] == list(VARIANTS)
    assert all(r["delta"] == r["predicted_delta"] for r in rows)
    assert "Full model" in capsys.readouterr().out


def test_console_entry_point_gradcheck():
    out = subprocess.run([sys.executable, "-m", "protofuse.cli", "gradcheck"],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stdout + out.stderr
    assert "FAIL" not in out.stdout


def test_unknown_subcommand_exit_code():
    out = subprocess.run([sys.executable, "-m", "protofuse.cli", "launch"], capture_output=True, text=True)
    assert out.returncode == 2
