"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` or
``python tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest

import oracles
from protofuse import diffcore as dc
from protofuse.ablation import VARIANTS, run_ablation
from protofuse.checks import run_all
from protofuse.dataio import MODALITIES, Config, SynthSpec, collate, generate_synthetic, split_samples
from protofuse.dmr import apply_gates, sequence_length
from protofuse.encoders import EncodedSequence
from protofuse.evaluation import MaskSpec, compute_metrics, eval_masked
from protofuse.model import build_variant, model_from_checkpoint, predict_samples, run_inference
from protofuse.objectives import div_loss, total_loss
from protofuse.pcs import ModalityScorer, select_and_fuse
from protofuse.spb import CrossAttentionExtractor, PrototypeBank, extract
from protofuse.trainer import Trainer, load_checkpoint, save_checkpoint

from conftest import SHORT

OVERFIT_TARGET = 0.05
OVERFIT_BUDGET = 500
BEHAVIOR_SEEDS = (0, 1, 2)


@pytest.fixture
def gate(capsys):
    def report(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {number:>2}] {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip())
        assert ok, f"criterion {number} failed: {detail}"
    return report


# 1 -----------------------------------------------------------------------

def test_gradient_integrity(gate):
    results, seconds = run_all(seed=0)
    failed = [f"{r.name} ({r.max_rel_err:.1e})" for r in results if not r.ok]
    worst = max(r.max_rel_err for r in results)
    model_check = next(r for r in results if r.name == "end-to-end loss")
    ok = not failed and seconds < 60 and model_check.checked == 20
    gate(1, "finite-difference gradients", ok,
         f"{len(results)} checks, worst rel err {worst:.1e} (< 1e-4), "
         f"model entries {model_check.checked}, {seconds:.1f}s (< 60s)" + (f", failed: {failed}" if failed else ""))


# 2 -----------------------------------------------------------------------

def test_structural_invariants(gate):
    manifest, samples = generate_synthetic(SynthSpec(seed=0, n_train=6, n_valid=0, n_test=0, lengths=SHORT))
    batch = collate(samples)
    problems = []

    cfg8 = Config(d=16, K=8, layers=2, heads=2, dropout=0.0)
    model = build_variant(cfg8, manifest.widths)
    out = model(batch)
    tokens = model.backbone.tokens(out.fused, out.responses)
    if sequence_length(8) != 33 or tokens.shape[1] != 33:
        problems.append(f"length {tokens.shape[1]}")

    alpha_err = float(np.max(np.abs(out.alpha.data.sum(axis=-1) - 1.0)))
    if alpha_err > 1e-6:
        problems.append(f"alpha row error {alpha_err:.1e}")

    gates = np.stack([g.data for g in out.gates])
    if not np.all((gates > 0) & (gates < 1)):
        problems.append("gate outside (0,1)")

    K = cfg8.K
    layer = model.backbone.layers[0]
    mixed = layer.mix(tokens)
    before = apply_gates(mixed, layer.gate_values(mixed), K).data[:, : 1 + K].copy()
    layer.gate.weight.data += np.random.default_rng(0).standard_normal(layer.gate.weight.shape)
    layer.gate.bias.data += 3.0
    after = apply_gates(mixed, layer.gate_values(mixed), K).data[:, : 1 + K]
    if not np.array_equal(before, after) or not np.array_equal(after, mixed.data[:, : 1 + K]):
        problems.append("cls/fused tokens changed by gate parameters")

    Z = np.stack([z.data for z in out.responses])
    fused = out.fused.data
    if not (np.all(fused >= Z.min(axis=0) - 1e-12) and np.all(fused <= Z.max(axis=0) + 1e-12)):
        problems.append("fused outside coordinate bounds")

    gate(2, "structural invariants", not problems,
         f"length 33, max |sum(alpha)-1| {alpha_err:.1e}, gates in "
         f"[{gates.min():.3f}, {gates.max():.3f}]" + (f"; problems: {problems}" if problems else ""))


# 3 -----------------------------------------------------------------------

def test_analytic_loss_values(gate):
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    ortho = float(div_loss(dc.Tensor(Q[:5])).data)
    ident = {K: float(div_loss(dc.Tensor(np.tile([0.6, 0.8], (K, 1)))).data) for K in (2, 4, 8)}
    defaults = Config()
    total, parts = total_loss(1.0, 2.0, 4.0, defaults.lambda_aux, defaults.lambda_div)
    linear = all(
        abs(total_loss(r, a, d)[0] - (r + 0.1 * a + 0.001 * d)) < 1e-12
        for r, a, d in rng.uniform(0, 10, (20, 3))
    )
    ok = (abs(ortho) < 1e-12 and all(abs(v - (K * K - K)) < 1e-12 for K, v in ident.items())
          and (defaults.lambda_aux, defaults.lambda_div) == (0.1, 0.001)
          and abs(total - 1.204) < 1e-12 and linear)
    gate(3, "analytic loss values", ok,
         f"div(orthonormal)={ortho:.1e}, div(identical)={ident} vs K^2-K, "
         f"total(1,2,4)={total:.6f}")


# 4 -----------------------------------------------------------------------

def test_oracle_equivalence(gate):
    rng = np.random.default_rng(7)
    bank = PrototypeBank(2, 4, rng)
    bank.M.data[...] = [[0.3, -1.2, 0.8, 0.1], [-0.5, 0.4, 1.1, -0.9]]
    ext = CrossAttentionExtractor(4, 2, rng)
    H = np.array([[0.5, -1.0, 2.0, 0.0], [1.5, 0.25, -0.5, 1.0], [-2.0, 0.75, 0.0, -1.25]])
    seq = EncodedSequence(dc.Tensor(H[None]), np.ones((1, 3), bool), "text")
    spb_err = float(np.max(np.abs(extract(bank, seq, ext).data[0] - oracles.extract(bank.M.data, H, ext))))

    scorer = ModalityScorer(3, rng)
    M = np.array([[0.2, -0.4, 1.0], [-1.0, 0.5, 0.3]])
    Zs = [np.array([[1.0, 0.0, -1.0], [0.5, 0.5, 0.5]]),
          np.array([[-0.3, 2.0, 0.1], [0.0, -1.0, 1.5]]),
          np.array([[0.7, -0.7, 0.7], [2.0, 0.1, -0.4]])]
    sel = select_and_fuse(tuple(dc.Tensor(z[None]) for z in Zs), dc.Tensor(M), scorer)
    alpha, fused = oracles.select_and_fuse(Zs, M, scorer)
    pcs_err = max(float(np.max(np.abs(sel.alpha.data[0] - alpha))),
                  float(np.max(np.abs(sel.fused.data[0] - fused))))
    gate(4, "oracle equivalence", spb_err < 1e-6 and pcs_err < 1e-6,
         f"extract max err {spb_err:.1e}, select_and_fuse max err {pcs_err:.1e} (< 1e-6)")


# 5 -----------------------------------------------------------------------

def overfit_fixture():
    return generate_synthetic(SynthSpec(seed=1, n_train=64, n_valid=16, n_test=16, lengths=SHORT))


def overfit_config(**overrides):
    base = dict(d=32, K=4, layers=2, heads=2, batch_size=64, lr=3e-3, warmup_steps=50,
                total_steps=OVERFIT_BUDGET, seed=0)
    base.update(overrides)
    return Config(**base)


def overfit(config, manifest, samples, check_every=10):
    """Train until train-set MSE (evaluation mode) drops below the target or
    the step budget runs out. Returns (steps, final train MSE)."""
    trainer = Trainer(config, manifest, samples)
    labels = np.array([s.label for s in trainer.train_set])

    def mse():
        return float(np.mean((predict_samples(trainer.model, trainer.train_set) - labels) ** 2))

    def reached(t):
        return t.step % check_every == 0 and mse() < OVERFIT_TARGET

    trainer.run(stop_when=reached)
    return trainer.step, mse()


def test_overfit_smoke(gate):
    manifest, samples = overfit_fixture()
    start = time.perf_counter()
    steps, mse = overfit(overfit_config(), manifest, samples)
    seconds = time.perf_counter() - start
    gate(5, "overfit smoke", mse < OVERFIT_TARGET and steps <= OVERFIT_BUDGET and seconds < 300,
         f"train MSE {mse:.4f} after {steps} steps (< {OVERFIT_TARGET} within {OVERFIT_BUDGET}), {seconds:.1f}s")


# 6, 7 -----------------------------------------------------------------------

def behavior_run(seed):
    manifest, samples = generate_synthetic(SynthSpec(
        seed=seed, n_train=192, n_valid=32, n_test=64, weights=(0.9, 0.05, 0.05),
        noise=0.1, lengths=SHORT))
    cfg = Config(d=32, K=4, layers=2, heads=2, batch_size=64, total_steps=300, warmup_steps=30,
                 lr=3e-3, seed=seed)
    trainer = Trainer(cfg, manifest, samples)
    trainer.run()
    model = model_from_checkpoint(trainer.best)
    test = split_samples(manifest, samples, "test")
    alpha = run_inference(model, test)["alpha"].mean(axis=(0, 1))
    masked = {m: eval_masked(model, manifest, samples, MaskSpec(frozenset([m]))).mae for m in MODALITIES}
    return alpha, masked


@pytest.fixture(scope="module")
def behavior():
    return {seed: behavior_run(seed) for seed in BEHAVIOR_SEEDS}


def test_behavioral_selection(gate, behavior):
    alphas = np.array([behavior[s][0] for s in BEHAVIOR_SEEDS])
    mean_text = float(alphas[:, 0].mean())
    per_seed = ", ".join(f"{a:.3f}" for a in alphas[:, 0])
    gate(6, "behavioral selection", mean_text > 0.5,
         f"mean test alpha (t, a, v) = {np.round(alphas.mean(axis=0), 3).tolist()}; "
         f"text per seed {per_seed} (> 0.5 on average)")


def test_masking_direction(gate, behavior):
    rows, ok = [], True
    for s in BEHAVIOR_SEEDS:
        m = behavior[s][1]
        ok &= m["text"] > m["audio"] and m["text"] > m["visual"]
        rows.append(f"seed {s}: t {m['text']:.3f} / a {m['audio']:.3f} / v {m['visual']:.3f}")
    gate(7, "masking direction", ok, "masked MAE " + "; ".join(rows))


# 8 -----------------------------------------------------------------------

def test_ablation_harness(gate):
    manifest, samples = overfit_fixture()
    config = overfit_config()
    labels = np.array([s.label for s in split_samples(manifest, samples, "train")])
    train_set = split_samples(manifest, samples, "train")

    def reached(t):
        if t.step % 10:
            return False
        preds = predict_samples(t.model, train_set)
        return float(np.mean((preds - labels) ** 2)) < OVERFIT_TARGET

    start = time.perf_counter()
    rows = run_ablation(config, manifest, samples, stop_when=reached)
    seconds = time.perf_counter() - start
    names = [r.variant for r in rows]
    deltas_ok = all(r.delta_ok for r in rows)
    fits = all(r.train_mse < OVERFIT_TARGET and r.steps <= OVERFIT_BUDGET for r in rows)
    detail = "; ".join(f"{r.variant}: delta {r.delta:+d} (pred {r.predicted_delta:+d}), "
                       f"MSE {r.train_mse:.3f} @ {r.steps}" for r in rows)
    gate(8, "ablation harness", names == list(VARIANTS) and len(rows) == 6 and deltas_ok and fits,
         f"6 rows in {seconds:.0f}s; {detail}")


# 9 -----------------------------------------------------------------------

def test_metric_goldens(gate):
    y = np.array([-2.0, -0.5, 0.0, 1.0, 2.5])
    ident = compute_metrics(y, y)
    a = compute_metrics([0.5, -0.5, 2.4], [1.0, -1.0, 3.0])
    b = compute_metrics([-0.2, 0.1, 1.0], [-1.0, 0.0, 2.0])
    const = compute_metrics([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])
    ok = (ident.mae == 0.0 and abs(ident.corr - 1.0) < 1e-12
          and ident.acc7 == ident.acc2_nn == ident.acc2_np == ident.f1_nn == ident.f1_np == 1.0
          and abs(a.mae - 1.6 / 3) < 1e-15 and a.acc7 == 2 / 3
          and b.acc2_nn == 1.0 and b.n == 3 and b.acc2_np == 1.0 and b.n_np == 2
          and const.corr == 0.0 and not const.corr_defined)
    gate(9, "metric goldens", ok,
         f"mae {a.mae:.4f}, Acc-7 {a.acc7:.4f}; NN {b.acc2_nn} over {b.n}, NP {b.acc2_np} over {b.n_np}; "
         f"constant corr {const.corr} flagged={not const.corr_defined}")


# 10 ----------------------------------------------------------------------

def test_determinism(gate, tmp_path):
    manifest, samples = generate_synthetic(SynthSpec(seed=4, n_train=40, n_valid=8, n_test=8, lengths=SHORT))
    cfg = Config(d=16, K=4, layers=2, heads=2, batch_size=16, total_steps=12, warmup_steps=3,
                 dropout=0.1, seed=3)

    def logged_run(path):
        t = Trainer(cfg, manifest, samples, log_path=path)
        t.run()
        return t

    a = logged_run(tmp_path / "a.jsonl")
    b = logged_run(tmp_path / "b.jsonl")
    same_logs = (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    part = Trainer(cfg, manifest, samples, log_path=tmp_path / "c.jsonl")
    part.run(until=5)
    save_checkpoint(part.checkpoint(), tmp_path / "c.ckpt")
    resumed = Trainer.from_checkpoint(load_checkpoint(tmp_path / "c.ckpt"), manifest, samples,
                                      log_path=tmp_path / "c.jsonl")
    resumed.run()
    resumed_logs = (tmp_path / "c.jsonl").read_bytes() == (tmp_path / "a.jsonl").read_bytes()
    params_equal = all(np.array_equal(p.data, q.data) and p.data.dtype == np.float64
                       for p, q in zip(a.model.parameters(), resumed.model.parameters()))
    final_a = a.checkpoint()
    save_checkpoint(final_a, tmp_path / "a.ckpt")
    save_checkpoint(resumed.checkpoint(), tmp_path / "r.ckpt")
    same_ckpt = (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "r.ckpt").read_bytes()
    n_lines = len((tmp_path / "a.jsonl").read_text().splitlines())
    gate(10, "determinism", same_logs and resumed_logs and params_equal and same_ckpt and b.step == 12,
         f"{n_lines}-line logs identical across runs: {same_logs}; resumed at step 5 -> "
         f"logs {resumed_logs}, params {params_equal}, checkpoint bytes {same_ckpt}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
