import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from protofuse import diffcore as dc
from protofuse.dataio import collate
from protofuse.diffcore import Parameter, check_gradients
from protofuse.errors import ContractError, DegeneratePrototypeError, SchemaError
from protofuse.model import build_variant
from protofuse.objectives import AuxHead, aux_loss, aux_loss_from_predictions, div_loss, reg_loss, total_loss

from conftest import small_config


def test_reg_loss_examples():
    assert reg_loss(dc.Tensor([1.0, -2.0]), [1.0, -2.0]).data == 0.0
    assert reg_loss(dc.Tensor([1.0, 2.0]), [0.0, 0.0]).data == 2.5


def test_reg_loss_gradient_is_scaled_residual(rng):
    pred, y = Parameter(rng.standard_normal(5)), rng.standard_normal(5)
    dc.backward(reg_loss(pred, y))
    assert_allclose(pred.grad, 2 * (pred.data - y) / 5)
    assert check_gradients(lambda: reg_loss(pred, y), [pred]).ok


def test_reg_loss_contract_errors():
    with pytest.raises(ContractError):
        reg_loss(dc.Tensor(np.zeros(0)), np.zeros(0))
    with pytest.raises(ContractError):
        reg_loss(dc.Tensor(np.zeros(3)), np.zeros(2))


def test_aux_loss_examples():
    y = np.array([2.0])
    assert aux_loss_from_predictions(dc.Tensor([[2.0, 2.0]]), y).data == 0.0
    assert aux_loss_from_predictions(dc.Tensor([[1.0, 3.0]]), y).data == 1.0


def test_aux_loss_gradients(rng):
    head = AuxHead(4, 3, rng)
    fused = Parameter(rng.standard_normal((2, 3, 4)))
    y = rng.standard_normal(2)
    res = check_gradients(lambda: aux_loss(fused, head, y), [fused, *head.parameters()],
                          zero_grad=head.zero_grad)
    assert res.ok, res


def test_shared_aux_head_is_one_linear_map(rng):
    head = AuxHead(4, 3, rng)
    assert head.num_parameters() == 5
    fused = rng.standard_normal((2, 3, 4))
    fused[:, 1] = fused[:, 0]
    out = head(dc.Tensor(fused)).data
    assert_allclose(out[:, 0], out[:, 1])


def test_per_slot_aux_heads(rng):
    head = AuxHead(4, 3, rng, per_slot=True)
    assert head.num_parameters() == 15
    assert head(dc.Tensor(rng.standard_normal((2, 3, 4)))).shape == (2, 3)
    with pytest.raises(SchemaError):
        head(dc.Tensor(rng.standard_normal((2, 2, 4))))


def test_div_loss_orthonormal_is_zero(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    assert div_loss(dc.Tensor(Q[:4])).data == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("K", [2, 3, 8])
def test_div_loss_identical_unit_rows(K):
    row = np.array([0.6, 0.8, 0.0])
    assert div_loss(dc.Tensor(np.tile(row, (K, 1)))).data == pytest.approx(K * K - K, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, 5), elements=st.floats(-3, 3)).filter(
           lambda M: np.all(np.linalg.norm(M, axis=1) > 0.1)),
       arrays(np.float64, (4,), elements=st.floats(0.01, 100)))
def test_div_loss_scale_invariant_and_nonnegative(M, scale):
    a = div_loss(dc.Tensor(M)).data
    b = div_loss(dc.Tensor(M * scale[:, None])).data
    assert a >= 0
    assert b == pytest.approx(a, abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_div_loss_zero_on_random_orthogonal_bases(seed, K):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    scales = rng.uniform(0.1, 10, size=K)
    assert div_loss(dc.Tensor(Q[:K] * scales[:, None])).data == pytest.approx(0.0, abs=1e-10)


def test_div_loss_gradients(rng):
    M = Parameter(rng.standard_normal((3, 4)))
    assert check_gradients(lambda: div_loss(M), [M]).ok


def test_degenerate_prototype_is_loud():
    M = np.ones((3, 4))
    M[1] = 0.0
    with pytest.raises(DegeneratePrototypeError, match=r"\[1\]"):
        div_loss(dc.Tensor(M))


def test_total_loss_examples():
    total, parts = total_loss(1.0, 2.0, 4.0)
    assert total == pytest.approx(1.204)
    assert (parts.lambda_aux, parts.lambda_div) == (0.1, 0.001)
    assert total_loss(1.5, 2.0, 4.0, 0.0, 0.0)[0] == 1.5


@settings(max_examples=40, deadline=None)
@given(*(st.floats(0, 100) for _ in range(5)))
def test_total_loss_is_linear(r, a, d, la, ld):
    total, _ = total_loss(r, a, d, la, ld)
    assert total == pytest.approx(r + la * a + ld * d)


def test_total_loss_rejects_negative_weights():
    with pytest.raises(ContractError):
        total_loss(1.0, 1.0, 1.0, -0.1, 0.0)


def test_prototype_gradient_flows_through_every_path(tiny_data):
    manifest, samples = tiny_data
    batch = collate(samples[:4])

    def grad_of_M(**kw):
        model = build_variant(small_config(**kw), manifest.widths)
        loss, _, _ = model.loss(batch)
        dc.backward(loss)
        return model.banks["text"].M.grad

    assert np.abs(grad_of_M()).sum() > 0
    # each path alone still reaches M
    assert np.abs(grad_of_M(lambda_aux=0.0, lambda_div=0.0, no_selection=True)).sum() > 0  # attention
    assert np.abs(grad_of_M(lambda_aux=0.0, lambda_div=0.0, no_spb=True)).sum() > 0  # scorer
    model = build_variant(small_config(), manifest.widths)
    dc.backward(model.diversity())
    assert np.abs(model.banks["text"].M.grad).sum() > 0  # diversity
