import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

import oracles
from protofuse.encoders import ModalityEncoder
from protofuse.errors import SchemaError


def _encoder(d_in=4, d=8, heads=2, seed=0, **kw):
    return ModalityEncoder("audio", d_in, d, heads, np.random.default_rng(seed), max_len=16, **kw)


def test_singleton_sequence_attends_to_itself(rng):
    enc = _encoder()
    x = rng.standard_normal((1, 1, 4))
    h = enc.proj(x) + enc.pos[:1]
    weights = enc.block.attn.attention_weights(enc.block.ln1(h), enc.block.ln1(h), np.ones((1, 1), bool))
    assert_array_equal(weights.data, 1.0)
    # with one position attention is the identity mix: out = o(v(ln1 h))
    h0 = h.data[0]
    blk = enc.block
    mixed = h0 + oracles.linear(oracles.linear(oracles.layer_norm(h0, blk.ln1), blk.attn.v), blk.attn.o)
    expected = mixed + oracles.feed_forward(oracles.layer_norm(mixed, blk.ln2), blk.ffn)
    out = enc(x, np.ones((1, 1), bool)).hidden.data[0]
    assert_allclose(out, expected, atol=1e-10)


def test_matches_loop_oracle(rng):
    enc = _encoder()
    x = rng.standard_normal((1, 5, 4))
    mask = np.array([[1, 1, 1, 1, 0]], bool)
    out = enc(x, mask).hidden.data[0]
    h = oracles.linear(x[0], enc.proj) + enc.pos.data[:5]
    expected = oracles.prenorm_block(h, enc.block, mask[0])
    assert_allclose(out[:4], expected[:4], atol=1e-10)
    assert_array_equal(out[4], 0.0)


def test_masked_tail_does_not_leak(rng):
    enc = _encoder()
    x = rng.standard_normal((2, 6, 4))
    mask = np.array([[1, 1, 1, 0, 0, 0], [1, 1, 1, 1, 1, 1]], bool)
    base = enc(x, mask).hidden.data
    x2 = x.copy()
    x2[0, 3:] = rng.standard_normal((3, 4)) * 100.0
    pert = enc(x2, mask).hidden.data
    assert_allclose(pert[0, :3], base[0, :3], atol=1e-6)
    assert_array_equal(pert[1], base[1])


def test_output_shape():
    enc = ModalityEncoder("visual", 4, 128, 8, np.random.default_rng(0))
    out = enc(np.random.default_rng(1).standard_normal((1, 7, 4)), np.ones((1, 7), bool))
    assert out.hidden.shape == (1, 7, 128)


def test_width_and_length_errors(rng):
    enc = _encoder()
    with pytest.raises(SchemaError, match="audio"):
        enc(rng.standard_normal((1, 3, 5)), np.ones((1, 3), bool))
    with pytest.raises(SchemaError, match="max_len"):
        enc(rng.standard_normal((1, 20, 4)), np.ones((1, 20), bool))


def test_positions_make_encoder_order_sensitive(rng):
    x = rng.standard_normal((1, 4, 4))
    mask = np.ones((1, 4), bool)
    rev = x[:, ::-1]
    with_pos = _encoder()
    assert not np.allclose(with_pos(x, mask).hidden.data[:, ::-1], with_pos(rev, mask).hidden.data)
    no_pos = _encoder(positions=False)
    assert_allclose(no_pos(x, mask).hidden.data[:, ::-1], no_pos(rev, mask).hidden.data, atol=1e-10)


def test_zeroing_one_encoder_leaves_others_unchanged(tiny_data):
    from protofuse.dataio import collate
    from protofuse.model import build_variant

    from conftest import small_config

    manifest, samples = tiny_data
    model = build_variant(small_config(), manifest.widths)
    batch = collate(samples[:4])
    before = {m: e.hidden.data.copy() for m, e in model.encode(batch).items()}
    for p in model.encoders["text"].parameters():
        p.data[...] = 0.0
    after = {m: e.hidden.data for m, e in model.encode(batch).items()}
    assert_array_equal(after["audio"], before["audio"])
    assert_array_equal(after["visual"], before["visual"])
    assert not np.allclose(after["text"], before["text"])
