import json
import math

import numpy as np
import pytest
from helpers import assert_grads_match

from epistemic_gan import autodiff as ad


def rng(seed=0):
    return np.random.default_rng(seed)


def away_from(x, points, gap=0.05):
    """Nudge entries of ``x`` off the kinks in ``points``."""
    x = x.copy()
    for p in points:
        near = np.abs(x - p) < gap
        x[near] = p + np.where(x[near] >= p, gap, -gap) * 2
    return x


def test_scalar_examples():
    assert ad.sigmoid(ad.Tensor(0.0)).item() == 0.5
    assert ad.softplus(ad.Tensor(1.0)).item() == pytest.approx(1.3132616875182228, abs=1e-12)
    assert ad.softplus(ad.Tensor(1.0)).item() == pytest.approx(math.log1p(math.e), abs=1e-15)


def test_inactive_hinge_has_zero_gradient():
    x = ad.Tensor(-0.3, requires_grad=True)
    y = ad.max_with_scalar(x, 0.0)
    assert y.item() == 0.0
    ad.backward(y)
    assert x.grad == 0.0


def test_gradient_is_zero_exactly_at_kink():
    x = ad.Tensor(0.0, requires_grad=True)
    ad.backward(ad.max_with_scalar(x, 0.0))
    assert x.grad == 0.0


@pytest.mark.parametrize("a, b, expected", [(0.7, 0.5, (1.0, 1.0)), (0.2, 0.3, (0.0, 0.0))])
def test_hinge_branches(a, b, expected):
    ta, tb = ad.Tensor(a, requires_grad=True), ad.Tensor(b, requires_grad=True)
    ad.backward(ad.max_with_scalar(ta + tb - 1.0, 0.0))
    assert (ta.grad, tb.grad) == expected


def test_sum_of_squares():
    x = ad.Tensor([1.0, 2.0, 3.0], requires_grad=True)
    ad.backward(ad.sum_(ad.square(x)))
    np.testing.assert_array_equal(x.grad, [2.0, 4.0, 6.0])


def test_sigmoid_of_dot_matches_finite_differences():
    r = rng(1)
    for _ in range(10):
        w, x = r.normal(size=(1, 5)), r.normal(size=(5, 1))
        assert_grads_match(lambda w, x: ad.sum_(ad.sigmoid(w @ x)), [w, x])


def test_shared_tensor_accumulates_both_paths():
    x = ad.Tensor([0.5, -1.5], requires_grad=True)
    y = ad.sum_(ad.tanh(x) * 3.0 + ad.exp(x))
    ad.backward(y)
    np.testing.assert_allclose(x.grad, 3.0 * (1 - np.tanh(x.data) ** 2) + np.exp(x.data), rtol=1e-14)


UNARY = {
    "neg": (lambda a: -a, None),
    "tanh": (ad.tanh, None),
    "sigmoid": (ad.sigmoid, None),
    "softplus": (ad.softplus, None),
    "exp": (ad.exp, None),
    "square": (ad.square, None),
    "log": (lambda a: ad.log(ad.exp(a) + 0.5), None),
    "max_with_scalar": (lambda a: ad.max_with_scalar(a, 0.1), [0.1]),
    "relu": (ad.relu, [0.0]),
    "leaky_relu": (ad.leaky_relu, [0.0]),
    "clip": (lambda a: ad.clip(a, -0.5, 0.5), [-0.5, 0.5]),
    "sum_axis": (lambda a: ad.sum_(a, axis=0), None),
    "mean_axis": (lambda a: ad.mean(a, axis=1, keepdims=True), None),
    "mean_all": (ad.mean, None),
    "reshape": (lambda a: ad.reshape(a, (12,)), None),
    "broadcast": (lambda a: ad.broadcast(ad.reshape(a, (1, 3, 4)), (2, 3, 4)), None),
    "slice_basic": (lambda a: a[1:, ::2], None),
    "slice_fancy": (lambda a: a[[0, 0, 2]], None),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_ops_match_finite_differences(name):
    op, kinks = UNARY[name]
    r = rng(sum(map(ord, name)))
    weights = r.normal(size=50)
    for _ in range(100 if name not in ("broadcast", "slice_fancy") else 20):
        x = r.normal(size=(3, 4))
        if kinks:
            x = away_from(x, kinks)

        def f(a):
            y = op(a)
            flat = ad.reshape(y, (y.data.size,))
            return ad.sum_(flat * weights[: y.data.size])

        assert_grads_match(f, [x])


BINARY = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / (ad.exp(b) + 0.5),
    "add_broadcast_row": lambda a, b: a + b[:1],
    "mul_broadcast_col": lambda a, b: a * b[:, :1],
    "concat": lambda a, b: ad.concat([a, b], axis=1),
    "concat_rows": lambda a, b: ad.concat([a, b[:1]], axis=0),
    "matmul": lambda a, b: a @ ad.reshape(b, (4, 3)),
}


@pytest.mark.parametrize("name", sorted(BINARY))
def test_binary_ops_match_finite_differences(name):
    op = BINARY[name]
    r = rng(len(name))
    weights = r.normal(size=50)
    for _ in range(100):
        a, b = r.normal(size=(3, 4)), r.normal(size=(3, 4))

        def f(x, y):
            out = op(x, y)
            return ad.sum_(ad.reshape(out, (out.data.size,)) * weights[: out.data.size])

        assert_grads_match(f, [a, b])


def test_scalar_operands_and_reflected_ops():
    x = ad.Tensor([1.0, 2.0], requires_grad=True)
    y = ad.sum_(2.0 - x + 1.0 / x + x * 3.0)
    ad.backward(y)
    np.testing.assert_allclose(x.grad, -1.0 - 1.0 / x.data**2 + 3.0)


def test_shape_mismatch_reports_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(4,\)"):
        ad.Tensor(np.ones((2, 3))) + ad.Tensor(np.ones(4))
    with pytest.raises(ValueError):
        ad.Tensor(np.ones((2, 3))) @ ad.Tensor(np.ones((2, 3)))


def test_backward_requires_scalar():
    x = ad.Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        ad.backward(x * 2.0)


def test_no_grad_and_frozen():
    w = ad.parameter(np.ones(2))
    with ad.no_grad():
        y = ad.sum_(w * 2.0)
    assert y._parents == ()
    x = ad.parameter(np.ones(2))
    with ad.frozen([w]):
        z = ad.sum_(w * x)
        ad.backward(z)
    assert w.grad is None
    np.testing.assert_array_equal(x.grad, [1.0, 1.0])
    assert w.requires_grad


def test_straight_through_forward_and_backward():
    s = ad.Tensor([0.2, 0.4], requires_grad=True)
    y = ad.straight_through(np.array([5.0, 7.0]), s)
    np.testing.assert_array_equal(y.data, [5.0, 7.0])
    ad.backward(ad.sum_(y * ad.Tensor([2.0, 3.0])))
    np.testing.assert_array_equal(s.grad, [2.0, 3.0])


def test_custom_op_gradients():
    x = ad.Tensor([0.3, -0.7], requires_grad=True)

    def bw(g):
        x._accumulate(g * 3 * x.data**2)

    ad.backward(ad.sum_(ad.custom_op(x.data**3, (x,), bw)))
    np.testing.assert_allclose(x.grad, 3 * x.data**2)


def test_repeated_passes_are_bit_reproducible():
    def run():
        r = rng(5)
        w = ad.parameter(r.normal(size=(4, 3)))
        x = ad.Tensor(r.normal(size=(8, 4)))
        ad.backward(ad.mean(ad.softplus(x @ w)))
        return w.grad.tobytes()

    assert run() == run()


# --- Adam -----------------------------------------------------------------------------------


def test_adam_defaults():
    c = ad.OptimConfig()
    assert (c.lr, c.beta1, c.beta2) == (2e-4, 0.5, 0.999)


def test_adam_zero_gradient_fixed_point():
    p = ad.parameter([1.5])
    opt = ad.Adam([p])
    p.grad = np.zeros(1)
    opt.step()
    assert p.data[0] == 1.5
    assert p.grad is None
    assert opt.step_count == 1


def test_adam_descends_quadratic():
    w = ad.parameter([1.0])
    opt = ad.Adam([w])
    ad.backward(ad.sum_(ad.square(w)))
    opt.step()
    assert w.data[0] < 1.0


def test_adam_converges_on_bowl():
    w = ad.parameter([1.0, -2.0])
    scale = ad.Tensor([1.0, 4.0])
    opt = ad.Adam([w], ad.OptimConfig(lr=0.05, beta1=0.9))

    def loss():
        return ad.sum_(ad.square(w) * scale)

    initial = loss().item()
    for _ in range(500):
        ad.backward(loss())
        opt.step()
    assert loss().item() < 1e-3 * initial


def test_adam_rejects_missing_grad():
    a, b = ad.parameter([1.0], name="a"), ad.parameter([2.0], name="b")
    opt = ad.Adam([a, b])
    ad.backward(ad.sum_(a * 2.0))
    with pytest.raises(ValueError, match="b"):
        opt.step()


# --- checkpoints ------------------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    r = rng(2)
    arrays = {"w": r.normal(size=(3, 4)), "b": r.normal(size=4), "s": np.array(2.5)}
    path = ad.save_arrays(tmp_path / "ck.egan", arrays, {"note": "x"})
    assert path.read_text().splitlines()[0] == "EGAN1"
    manifest = json.loads(path.read_text().split("\n", 1)[1])
    assert manifest["dtype"] == "<f8"
    blob = (tmp_path / "ck.egan.bin").read_bytes()
    assert len(blob) == 8 * (12 + 4 + 1)
    back, meta = ad.load_arrays(path)
    assert meta == {"note": "x"}
    for k, v in arrays.items():
        np.testing.assert_array_equal(back[k], v)


def test_checkpoint_rejects_bad_magic(tmp_path):
    p = tmp_path / "bad"
    p.write_text("NOPE\n{}")
    with pytest.raises(ValueError, match="EGAN1"):
        ad.load_arrays(p)
