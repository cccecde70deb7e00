"""Finite-difference gradient suite over every differentiable op, each
model block, and the end-to-end loss. Everything runs in 64-bit."""

from __future__ import annotations

import time

import numpy as np

from . import diffcore as dc
from .dataio import Config, SynthSpec, collate, generate_synthetic
from .diffcore import GradCheckResult, Parameter, check_gradients
from .dmr import GatedBackbone, RegressionHead
from .encoders import ModalityEncoder
from .layers import LayerNorm, MultiHeadAttention
from .model import build_variant
from .objectives import AuxHead, aux_loss, div_loss, reg_loss
from .pcs import ModalityScorer, select_and_fuse
from .spb import CrossAttentionExtractor, PrototypeBank, extract

TOL = 1e-4
FULL_MODEL = dict(d=16, K=4, layers=2, heads=2)


def _param(rng, *shape, low=None):
    data = rng.standard_normal(shape)
    if low is not None:
        # keep away from kinks/poles so central differences are well defined
        data = np.sign(data) * (np.abs(data) + low)
    return Parameter(data)


def _weighted(rng, out):
    """Scalarize ``out`` with fixed random weights so every output element
    contributes a distinct gradient."""
    w = rng.standard_normal(out.shape)
    return lambda t: (t * w).sum()


def _check(name, fn, tensors, **kw):
    return check_gradients(fn, tensors, name=name, tol=TOL, **kw)


def op_checks(seed=0) -> list[GradCheckResult]:
    rng = np.random.default_rng(seed)
    P = lambda *s, **k: _param(rng, *s, **k)  # noqa: E731
    results = []

    def run(name, build, tensors, **kw):
        reduce = _weighted(rng, build())
        results.append(_check(name, lambda: reduce(build()), tensors, **kw))

    a, b = P(3, 4), P(4)
    run("add (broadcast)", lambda: a + b, [a, b])
    run("sub (broadcast)", lambda: a - b.reshape(1, 4), [a, b])
    c = P(3, 1)
    run("mul (broadcast)", lambda: a * c, [a, c])
    den = P(3, 4, low=0.5)
    run("div", lambda: a / den, [a, den])
    pos = Parameter(np.abs(rng.standard_normal((3, 4))) + 0.5)
    run("power", lambda: dc.power(pos, 1.7), [pos])
    run("sqrt", lambda: dc.sqrt(pos), [pos])
    run("square", lambda: dc.square(a), [a])
    run("exp", lambda: dc.exp(a), [a])
    away = P(3, 4, low=0.1)
    run("abs", lambda: dc.abs_(away), [away])
    run("sigmoid", lambda: dc.sigmoid(a * 3.0), [a])
    run("relu", lambda: dc.relu(away), [away])

    x2, w2 = P(3, 5), P(5, 2)
    run("matmul 2d", lambda: x2 @ w2, [x2, w2])
    x3 = P(2, 3, 5)
    run("matmul 3d@2d", lambda: x3 @ w2, [x3, w2])
    y3 = P(2, 5, 4)
    run("matmul batched", lambda: x3 @ y3, [x3, y3])

    run("sum axis", lambda: x3.sum(axis=1), [x3])
    run("mean axis keepdims", lambda: dc.mean(x3, axis=(0, 2), keepdims=True), [x3])
    run("reshape", lambda: x3.reshape(6, 5), [x3])
    run("transpose", lambda: dc.transpose(x3, (2, 0, 1)), [x3])
    run("swapaxes", lambda: dc.swapaxes(x3, 1, 2), [x3])
    run("getitem", lambda: x3[:, 1:, ::2], [x3])
    run("broadcast_to", lambda: dc.broadcast_to(b, (2, 3, 4)), [b])
    p1, p2 = P(2, 1, 3), P(2, 2, 3)
    run("concat", lambda: dc.concat([p1, p2], axis=1), [p1, p2])
    run("stack", lambda: dc.stack([a, a * 2.0], axis=-1), [a])

    s = P(2, 3, 6)
    run("softmax", lambda: dc.softmax(s, axis=-1), [s])
    mask = np.ones((2, 3, 6), dtype=bool)
    mask[0, :, 4:] = False
    run("softmax masked", lambda: dc.softmax(s, axis=-1, mask=mask), [s])
    run("softmax axis 1", lambda: dc.softmax(s, axis=1), [s])

    g, bb = P(6), P(6)
    run("layer_norm", lambda: dc.layer_norm(s, g, bb), [s, g, bb])

    def dropped():
        return dc.dropout(s, 0.3, np.random.default_rng(7), training=True)

    run("dropout (fixed mask)", dropped, [s])
    return results


def block_checks(seed=0) -> list[GradCheckResult]:
    rng = np.random.default_rng(seed)
    init = np.random.default_rng(seed + 1)
    d, K, heads, B = 8, 3, 2, 2
    results = []

    def run(name, module, build):
        reduce = _weighted(rng, build())
        results.append(_check(name, lambda: reduce(build()), module.parameters(),
                              zero_grad=module.zero_grad))

    ln = LayerNorm(d)
    ln.gain.data[...] = rng.standard_normal(d)
    xs = dc.Tensor(rng.standard_normal((B, 5, d)))
    run("layer norm module", ln, lambda: ln(xs))

    attn = MultiHeadAttention(d, heads, init)
    kmask = np.array([[1, 1, 1, 0, 0], [1, 1, 1, 1, 1]], dtype=bool)
    run("multi-head attention", attn, lambda: attn(xs, xs, kmask))

    enc = ModalityEncoder("text", 4, d, heads, init, max_len=8)
    raw = rng.standard_normal((B, 5, 4))
    run("modality encoder", enc, lambda: enc(raw, kmask).hidden)

    bank = PrototypeBank(K, d, init)
    ext = CrossAttentionExtractor(d, heads, init)
    seq = enc(raw, kmask)
    seq = type(seq)(dc.Tensor(seq.hidden.data), seq.mask, seq.modality)

    class _Pair(dc.Module):
        def __init__(self, *mods):
            self.mods = list(mods)

    run("prototype extraction", _Pair(bank, ext), lambda: extract(bank, seq, ext))

    scorer = ModalityScorer(d, init)
    responses = tuple(dc.Tensor(rng.standard_normal((B, K, d))) for _ in range(3))
    run("selection and fusion", _Pair(scorer, bank),
        lambda: select_and_fuse(responses, bank.M, scorer).fused)

    backbone = GatedBackbone(d, heads, 2, K, init)
    fused = dc.Tensor(rng.standard_normal((B, K, d)))
    run("gated backbone", backbone,
        lambda: backbone(backbone.tokens(fused, responses)).prediction)

    head = RegressionHead(d, init)
    h = dc.Tensor(rng.standard_normal((B, d)))
    run("regression head", head, lambda: head(h))

    y = rng.standard_normal(B)
    aux = AuxHead(d, K, init)
    results.append(_check("aux loss", lambda: aux_loss(fused, aux, y), aux.parameters(),
                          zero_grad=aux.zero_grad))
    pred = Parameter(rng.standard_normal(B))
    results.append(_check("regression loss", lambda: reg_loss(pred, y), [pred]))
    results.append(_check("diversity loss", lambda: div_loss(bank.M), [bank.M]))
    return results


def model_check(seed=0, n_params=20, batch=3) -> GradCheckResult:
    """End-to-end loss vs ``n_params`` randomly sampled parameter entries."""
    manifest, samples = generate_synthetic(SynthSpec(
        seed=seed, n_train=batch, n_valid=0, n_test=0,
        lengths={"text": (3, 6), "audio": (4, 8), "visual": (3, 7)},
    ))
    cfg = Config(**FULL_MODEL, dropout=0.0, seed=seed)
    model = build_variant(cfg, manifest.widths)
    b = collate(samples[:batch])
    params = model.parameters()
    sizes = np.array([p.size for p in params], dtype=np.float64)
    rng = np.random.default_rng(seed)
    # sample entries uniformly over all scalars, not over tensors
    flat = rng.choice(int(sizes.sum()), size=n_params, replace=False)
    bounds = np.cumsum(sizes).astype(int)
    picks: dict[int, list[int]] = {}
    for f in flat:
        i = int(np.searchsorted(bounds, f, side="right"))
        offset = int(f - (bounds[i - 1] if i else 0))
        picks.setdefault(i, []).append(offset)
    return check_gradients(lambda: model.loss(b)[0], params, name="end-to-end loss",
                           tol=TOL, indices=picks, zero_grad=model.zero_grad)


def run_all(seed=0) -> tuple[list[GradCheckResult], float]:
    start = time.perf_counter()
    results = op_checks(seed) + block_checks(seed) + [model_check(seed)]
    return results, time.perf_counter() - start
