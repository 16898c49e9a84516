import numpy as np
import pytest

from ortagger.autodiff import (
    Adam,
    AdamState,
    NumericError,
    Parameter,
    ShapeError,
    Tensor,
    adam_step,
    backward,
    clip_grad_norm,
    forward_eval,
    grad_check,
    no_grad,
    ops,
)

TOL = 1e-4


def t(shape, rng, low=-1.0, high=1.0):
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def _weighted(out: Tensor, seed: int = 99) -> Tensor:
    # contract with fixed random weights so every output entry matters
    w = np.random.default_rng(seed).normal(size=out.shape)
    return (out * Tensor(w)).sum()


# (name, builder(rng) -> (fn, inputs))
def _cases():
    def binary(op, b_shape=(3, 4), positive_b=False):
        def build(rng):
            a = t((2, 3, 4), rng)
            b = t(b_shape, rng, 0.5, 2.0) if positive_b else t(b_shape, rng)
            return (lambda: _weighted(op(a, b))), [a, b]
        return build

    def unary(op, low=-1.0, high=1.0, shape=(3, 5)):
        def build(rng):
            a = t(shape, rng, low, high)
            return (lambda: _weighted(op(a))), [a]
        return build

    def mm(rng):
        a, b = t((2, 3, 4), rng), t((4, 5), rng)
        return (lambda: _weighted(a @ b)), [a, b]

    def mm_vec(rng):
        a, b = t((3, 4), rng), t((4,), rng)
        return (lambda: _weighted(a @ b)), [a, b]

    def getitem_adv(rng):
        a = t((5, 3), rng)
        idx = np.array([0, 2, 2, 4])
        return (lambda: _weighted(a[idx])), [a]

    def embedding(rng):
        w = t((6, 3), rng)
        ids = np.array([[1, 2, 2], [5, 0, 1]])
        return (lambda: _weighted(ops.embedding(w, ids))), [w]

    def gather(rng):
        a = t((2, 3, 5), rng)
        idx = rng.integers(0, 5, size=(2, 3, 4))
        return (lambda: _weighted(ops.gather_last(a, idx))), [a]

    def layer_norm(rng):
        x, g, b = t((2, 3, 6), rng), t((6,), rng), t((6,), rng)
        return (lambda: _weighted(ops.layer_norm(x, g, b))), [x, g, b]

    def cross_entropy(rng):
        logits = t((2, 4, 5), rng)
        targets = rng.integers(0, 5, size=(2, 4))
        mask = np.array([[1, 1, 1, 0], [1, 1, 1, 1]], dtype=bool)
        return (lambda: ops.cross_entropy(logits, targets, mask)), [logits]

    def concat(rng):
        a, b = t((2, 3), rng), t((2, 4), rng)
        return (lambda: _weighted(ops.concat([a, b], axis=1))), [a, b]

    def stack(rng):
        a, b = t((2, 3), rng), t((2, 3), rng)
        return (lambda: _weighted(ops.stack([a, b], axis=1))), [a, b]

    def pad(rng):
        a = t((2, 3, 2), rng)
        return (lambda: _weighted(ops.pad(a, 2, 1, axis=1))), [a]

    def where(rng):
        a, b = t((3, 4), rng), t((3, 4), rng)
        m = rng.random((3, 4)) > 0.5
        return (lambda: _weighted(ops.where(m, a, b))), [a, b]

    return {
        "add": binary(lambda a, b: a + b),
        "sub": binary(lambda a, b: a - b),
        "mul": binary(lambda a, b: a * b),
        "div": binary(lambda a, b: a / b, positive_b=True),
        "broadcast_row": binary(lambda a, b: a * b, b_shape=(4,)),
        "neg": unary(lambda a: -a),
        "pow": unary(lambda a: a ** 3),
        "sqrt": unary(lambda a: a ** 0.5, 0.5, 2.0),
        "matmul": mm,
        "matmul_vec": mm_vec,
        "sum_axis": unary(lambda a: a.sum(axis=1)),
        "mean": unary(lambda a: a.mean(axis=0, keepdims=True)),
        "reshape": unary(lambda a: a.reshape(5, 3)),
        "transpose": unary(lambda a: a.transpose()),
        "getitem_slice": unary(lambda a: a[1:, ::2]),
        "getitem_adv": getitem_adv,
        "exp": unary(ops.exp),
        "log": unary(ops.log, 0.5, 2.0),
        "tanh": unary(ops.tanh),
        "sigmoid": unary(ops.sigmoid, -4, 4),
        "relu": unary(ops.relu),
        "softmax": unary(lambda a: ops.softmax(a, axis=-1)),
        "log_softmax": unary(lambda a: ops.log_softmax(a, axis=0)),
        "logsumexp": unary(lambda a: ops.logsumexp(a, axis=1)),
        "embedding": embedding,
        "gather_last": gather,
        "layer_norm": layer_norm,
        "cross_entropy": cross_entropy,
        "concat": concat,
        "stack": stack,
        "pad": pad,
        "where": where,
    }


CASES = _cases()


@pytest.mark.parametrize("name", sorted(CASES))
def test_grad_check_every_op(name):
    for seed in range(10):
        rng = np.random.default_rng(seed)
        fn, inputs = CASES[name](rng)
        assert grad_check(fn, inputs) < TOL, name


def test_relu_avoids_kink():
    # finite differences are only meaningful away from 0
    rng = np.random.default_rng(0)
    a = Tensor(rng.choice([-1, 1], size=(4, 4)) * rng.uniform(0.1, 1, size=(4, 4)), requires_grad=True)
    assert grad_check(lambda: _weighted(ops.relu(a)), [a]) < TOL


def test_forward_values():
    a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
    b = Tensor(np.array([[0.5], [2.0]]))
    np.testing.assert_allclose(forward_eval(a @ b), [[4.5], [9.5]])
    np.testing.assert_allclose(ops.softmax(Tensor(np.zeros(4))).data, 0.25)
    np.testing.assert_allclose(ops.logsumexp(Tensor(np.array([1000.0, 1000.0]))).data,
                               1000 + np.log(2))


def test_grad_accumulates_over_reuse():
    x = Tensor(np.array(3.0), requires_grad=True)
    y = x * x + x
    backward(y)
    assert x.grad == pytest.approx(7.0)


def test_backward_needs_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        backward(x * 2)


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_numeric_error_names_op():
    x = Tensor(np.array([0.0, 1.0]), requires_grad=True)
    with pytest.raises(NumericError) as info:
        ops.log(x)
    assert info.value.op == "log"


def test_no_grad_builds_no_graph():
    x = Tensor(np.ones(2), requires_grad=True)
    with no_grad():
        y = (x * 2).sum()
    assert not y.requires_grad


def test_frozen_parameter_gets_no_grad():
    w = Parameter(np.ones(3), frozen=True)
    v = Parameter(np.ones(3))
    backward((w * v).sum())
    assert w.grad is None
    np.testing.assert_allclose(v.grad, 1.0)


def test_grad_check_rejects_large_epsilon():
    x = Tensor(np.ones(2), requires_grad=True)
    with pytest.raises(ValueError):
        grad_check(lambda: (x * x).sum(), [x], epsilon=0.1)


def test_adam_first_step_moves_by_lr():
    # bias correction makes the first step exactly lr * sign(g)
    p = Parameter(np.array([1.0, -2.0, 0.5]))
    adam_step([p], [np.array([0.3, -4.0, 1e-3])], AdamState(), lr=0.1)
    np.testing.assert_allclose(p.data, [0.9, -1.9, 0.4], atol=1e-6)


def test_adam_skips_frozen_and_rejects_bad_input():
    p = Parameter(np.ones(2), frozen=True)
    adam_step([p], [np.ones(2)], AdamState(), lr=0.1)
    np.testing.assert_array_equal(p.data, 1.0)
    q = Parameter(np.ones(2))
    with pytest.raises(ShapeError):
        adam_step([q], [np.ones(3)], AdamState(), lr=0.1)
    with pytest.raises(ValueError):
        adam_step([q], [np.ones(2)], AdamState(), lr=0.0)


def test_adam_minimizes_quadratic():
    x = Parameter(np.array([0.0]))
    opt = Adam([x], lr=0.1)
    for _ in range(500):
        opt.zero_grad()
        backward(((x - 3.0) ** 2).sum())
        opt.step()
    assert abs(x.data[0] - 3.0) < 1e-2


def test_clip_grad_norm():
    a, b = Parameter(np.zeros(2)), Parameter(np.zeros(1))
    a.grad, b.grad = np.array([3.0, 0.0]), np.array([4.0])
    assert clip_grad_norm([a, b], 1.0) == pytest.approx(5.0)
    total = np.sqrt((a.grad ** 2).sum() + (b.grad ** 2).sum())
    assert total == pytest.approx(1.0)


def test_dropout_identity_at_eval_and_scaled_in_training():
    x = Tensor(np.ones((200, 50)))
    assert ops.dropout(x, 0.5, np.random.default_rng(0), training=False) is x
    y = ops.dropout(x, 0.5, np.random.default_rng(0), training=True).data
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.05


def test_small_worked_values():
    out = Tensor(np.ones((2, 3))) @ Tensor(np.ones((3, 1)))
    np.testing.assert_array_equal(out.data, [[3.0], [3.0]])
    rng = np.random.default_rng(0)
    s = ops.softmax(Tensor(rng.normal(size=(5, 7)) * 10)).data
    assert (s >= 0).all()
    np.testing.assert_allclose(s.sum(axis=-1), 1.0, atol=1e-12)
    assert ops.logsumexp(Tensor(np.zeros(4))).item() == pytest.approx(np.log(4), abs=1e-15)


def test_sum_and_dot_gradients():
    x = Tensor(np.random.default_rng(1).normal(size=(2, 3, 4)), requires_grad=True)
    backward(x.sum())
    np.testing.assert_array_equal(x.grad, 1.0)
    w = Tensor(np.array([1.0, -2.0, 0.5]), requires_grad=True)
    v = np.array([3.0, 4.0, 5.0])
    backward(w @ Tensor(v))
    np.testing.assert_array_equal(w.grad, v)


def test_grad_check_linear_is_exact():
    rng = np.random.default_rng(2)
    w = Tensor(rng.normal(size=6), requires_grad=True)
    x = Tensor(rng.normal(size=6))
    assert grad_check(lambda: w @ x, [w]) < 1e-9


def test_grad_check_two_layer_attention_block():
    from ortagger.encoders import EncoderConfig, TransformerLayer

    rng = np.random.default_rng(3)
    cfg = EncoderConfig(family="trs", d_model=4, num_heads=2, dropout=0.0, ff_mode="linear")
    layers = [TransformerLayer(cfg, rng) for _ in range(2)]
    x = Tensor(rng.normal(size=(1, 5, 4)), requires_grad=True)
    w = Tensor(rng.normal(size=(1, 5, 4)))

    def fn():
        h = x
        for layer in layers:
            h = layer(h, None, False, None)
        return (h * w).sum()
    params = [p for layer in layers for p in layer.parameters()]
    assert grad_check(fn, [x] + params) < 1e-4


def test_adam_zero_gradient_leaves_parameter():
    p = Parameter(np.array([1.5, -0.5]))
    adam_step([p], [np.zeros(2)], AdamState(), lr=0.1)
    np.testing.assert_allclose(p.data, [1.5, -0.5], atol=1e-12)


def test_identical_seeds_give_identical_values_and_gradients():
    def run():
        rng = np.random.default_rng(4)
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
        out = ops.log_softmax(ops.tanh(a @ b)).sum()
        backward(out)
        return out.item(), a.grad.copy(), b.grad.copy()
    first, second = run(), run()
    assert first[0] == second[0]
    assert np.array_equal(first[1], second[1]) and np.array_equal(first[2], second[2])
