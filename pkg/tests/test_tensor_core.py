import math

import numpy as np
import pytest

from src.components.gradient_check import CHECKED_NAMES, aligner_parameter_errors, check_case
from src.constants import GRADCHECK_TOLERANCE
from src.core import ops
from src.core.checkpoint import load_checkpoint, save_checkpoint, state_checksum
from src.core.gradcheck import finite_diff_check
from src.core.nn import AttentionParams, Linear, attention, multi_head_attention
from src.core.optim import AdamState, adam_step
from src.core.tensor import Tape, Tensor, backward
from src.exception import InvariantViolationError, NumericError, TensorShapeError


def test_softmax_is_stable_for_large_logits():
    y = ops.softmax(Tensor([[1000.0, 0.0], [3.0, 3.0]]))
    assert np.allclose(y.data[0], [1.0, 0.0])
    assert np.allclose(y.data[1], [0.5, 0.5])
    assert np.allclose(y.data.sum(axis=-1), 1.0)


def test_matmul_gradient_matches_central_differences():
    rng = np.random.default_rng(0)
    b = Tensor(rng.standard_normal((4, 3)))
    weights = Tensor(rng.standard_normal((5, 3)))
    x = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
    err = finite_diff_check(lambda t: ops.sum_all(ops.mul(ops.matmul(t, b), weights)), x)
    assert err < 1e-6


def test_cross_entropy_reference_values():
    uniform = ops.cross_entropy_logits(Tensor(np.zeros((1, 4))), [2])
    assert uniform.item() == pytest.approx(math.log(4), abs=1e-12)
    confident = ops.cross_entropy_logits(Tensor([[1000.0, 0.0, 0.0]]), [0])
    assert confident.item() == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_rejects_out_of_range_target():
    with pytest.raises(TensorShapeError):
        ops.cross_entropy_logits(Tensor(np.zeros((2, 3))), [0, 3])


def test_attention_ignores_key_value_order():
    rng = np.random.default_rng(4)
    params = AttentionParams.init(rng, 8)
    query = Tensor(rng.standard_normal((3, 8)))
    kv = rng.standard_normal((6, 8))
    perm = rng.permutation(6)
    out = multi_head_attention(params, query, Tensor(kv), heads=2)
    shuffled = multi_head_attention(params, query, Tensor(kv[perm]), heads=2)
    assert np.max(np.abs(out.data - shuffled.data)) <= 1e-12


def test_attention_over_identical_values_returns_their_projection():
    rng = np.random.default_rng(6)
    params = AttentionParams.init(rng, 8)
    keys = Tensor(rng.standard_normal((5, 8)))
    row = rng.standard_normal((1, 8))
    out = attention(Tensor(rng.standard_normal((3, 8))), keys, Tensor(np.repeat(row, 5, axis=0)), params, heads=2)
    expected = params.w_o(params.w_v(Tensor(row))).data
    assert np.allclose(out.data, np.repeat(expected, 3, axis=0), atol=1e-12)
    with pytest.raises(TensorShapeError):
        attention(keys, keys, Tensor(np.zeros((4, 8))), params, heads=2)


def test_attention_rejects_indivisible_heads():
    rng = np.random.default_rng(0)
    params = AttentionParams.init(rng, 6)
    x = Tensor(rng.standard_normal((2, 6)))
    with pytest.raises(TensorShapeError):
        multi_head_attention(params, x, x, heads=4)


def test_backward_accumulates_repeated_use():
    x = Tensor(np.ones((2, 3)), requires_grad=True)
    with Tape() as tape:
        loss = ops.sum_all(ops.add(x, x))
    backward(loss, tape)
    assert np.array_equal(x.grad, np.full((2, 3), 2.0))


def test_backward_twice_doubles_gradients():
    x = Tensor([3.0], requires_grad=True)
    with Tape() as tape:
        loss = ops.sum_all(ops.mul(x, x))
    backward(loss, tape)
    assert x.grad.tolist() == [6.0]
    backward(loss, tape)
    assert x.grad.tolist() == [12.0]


def test_backward_needs_a_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = ops.scale(x, 2.0)
    with pytest.raises(TensorShapeError):
        backward(y, tape)


def test_untaped_ops_record_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        ops.scale(Tensor(np.ones(3)), 2.0)
    assert len(tape) == 0
    assert ops.scale(x, 2.0).requires_grad is False


def test_finite_diff_check_reference_functions():
    x = Tensor(np.random.default_rng(1).standard_normal((3, 2)), requires_grad=True)
    assert finite_diff_check(ops.sum_all, x) < 1e-10
    square = Tensor([3.0], requires_grad=True)
    assert finite_diff_check(lambda t: ops.sum_all(ops.mul(t, t)), square) < 1e-8
    assert square.data.tolist() == [3.0]


def test_adam_first_step_moves_by_learning_rate():
    p = Tensor([1.0], requires_grad=True)
    p.grad = np.array([1.0])
    state = AdamState.create([p], lr=0.1)
    adam_step([p], state)
    assert p.data[0] == pytest.approx(0.9, abs=1e-6)
    assert p.grad is None


def test_adam_minimizes_quadratic_bowl():
    w = Tensor([0.3, -0.2], requires_grad=True)
    state = AdamState.create([w], lr=1e-2)
    for _ in range(200):
        with Tape() as tape:
            loss = ops.sum_all(ops.mul(w, w))
        backward(loss, tape)
        adam_step([w], state)
    assert np.linalg.norm(w.data) < 1e-3


def test_adam_rejects_foreign_state():
    a = Tensor(np.zeros(2), requires_grad=True)
    state = AdamState.create([a], lr=0.1)
    with pytest.raises(TensorShapeError):
        adam_step([Tensor(np.zeros(3), requires_grad=True)], state)


def test_non_finite_values_are_numeric_errors():
    with pytest.raises(NumericError):
        Tensor([1.0, np.nan])
    with pytest.raises(NumericError):
        ops.l2_normalize_rows(Tensor(np.zeros((1, 3))))


@pytest.mark.parametrize("name", sorted(CHECKED_NAMES))
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradient_cases(name, seed):
    assert check_case(name, seed) <= GRADCHECK_TOLERANCE


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(CHECKED_NAMES))
def test_gradient_cases_over_twenty_seeds(name):
    assert max(check_case(name, seed) for seed in range(20)) <= GRADCHECK_TOLERANCE


def test_aligner_gradients_cover_every_parameter():
    errors = aligner_parameter_errors(4)
    assert "query_bank" in errors
    assert any(name.startswith("layers.0.") for name in errors)
    assert any(name.startswith("pool_head.") for name in errors)
    assert max(errors.values()) <= GRADCHECK_TOLERANCE


def test_checkpoint_round_trip(tmp_path):
    layer = Linear.init(np.random.default_rng(2), 3, 5)
    path = str(tmp_path / "layer.ckpt")
    save_checkpoint(path, layer.state_dict())
    restored = Linear.init(np.random.default_rng(99), 3, 5)
    assert state_checksum(restored.state_dict()) != state_checksum(layer.state_dict())
    restored.load_state_dict(load_checkpoint(path))
    assert state_checksum(restored.state_dict()) == state_checksum(layer.state_dict())
    assert list(load_checkpoint(path)) == list(layer.state_dict())


def test_load_state_dict_rejects_wrong_shape():
    layer = Linear.init(np.random.default_rng(2), 3, 5)
    state = {name: np.zeros((1,)) for name in layer.state_dict()}
    with pytest.raises(TensorShapeError):
        layer.load_state_dict(state)


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "bogus.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(InvariantViolationError):
        load_checkpoint(str(path))
