"""Autodiff tape: forward values, backward rules and the error surface."""

import numpy as np
import pytest

from spikekit.errors import ContractError, DimensionError, NonFiniteError
from spikekit.gradcheck import central_difference
from spikekit.tensor import (
    OpKind,
    Tensor,
    add,
    backward,
    clamp,
    cross_entropy,
    expand,
    heaviside,
    matmul,
    mean,
    mul,
    no_grad,
    reshape,
    round_half_even,
    sigmoid,
    stack,
    take,
    tensor_sum,
)


class TestConstruction:
    def test_rejects_nan_and_inf(self):
        with pytest.raises(NonFiniteError):
            Tensor([1.0, np.nan])
        with pytest.raises(NonFiniteError):
            Tensor(np.inf)

    def test_data_is_read_only(self):
        t = Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            t.data[0] = 5.0

    def test_item_requires_single_element(self):
        assert Tensor(3.5).item() == 3.5
        with pytest.raises(ContractError):
            Tensor([1.0, 2.0]).item()


class TestForwardOps:
    def test_matmul_identity_and_dot(self):
        np.testing.assert_array_equal(matmul(Tensor(np.eye(2)), Tensor([[3.0], [4.0]])).data, [[3.0], [4.0]])
        np.testing.assert_array_equal(matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]])).data, [[11.0]])

    def test_matmul_shape_mismatch(self):
        with pytest.raises(DimensionError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_round_half_even(self):
        assert round_half_even(Tensor(2.5)).item() == 2.0
        assert round_half_even(Tensor(3.5)).item() == 4.0
        x = Tensor(np.linspace(-5, 5, 41))
        once = round_half_even(x)
        np.testing.assert_array_equal(round_half_even(once).data, once.data)

    def test_clamp_and_heaviside(self):
        assert clamp(Tensor(5.1), 0, 4).item() == 4.0
        assert heaviside(Tensor(0.0)).item() == 1.0
        assert heaviside(Tensor(-1e-12)).item() == 0.0

    def test_no_implicit_broadcast(self):
        with pytest.raises(DimensionError):
            add(Tensor(np.ones((2, 3))), Tensor(np.ones(3)))
        # scalar operands are allowed
        np.testing.assert_array_equal(add(Tensor(np.ones((2, 3))), Tensor(2.0)).data, np.full((2, 3), 3.0))

    def test_sigmoid_saturates_without_overflow(self):
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            out = sigmoid(Tensor([-1000.0, 0.0, 1000.0])).data
        np.testing.assert_allclose(out, [0.0, 0.5, 1.0], atol=1e-300)
        assert sigmoid(Tensor(2.0)).item() == pytest.approx(1.0 / (1.0 + np.exp(-2.0)), rel=1e-12)


class TestBackward:
    def test_sum_gives_ones(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        grads = backward(tensor_sum(x))
        np.testing.assert_array_equal(grads[x], np.ones((2, 3)))

    def test_sum_of_squares(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        grads = backward(tensor_sum(mul(x, x)))
        np.testing.assert_array_equal(grads[x], [2.0, 4.0])

    def test_shared_node_accumulates(self):
        x = Tensor([1.5, -2.0], requires_grad=True)
        y = mul(x, Tensor(3.0))
        grads = backward(tensor_sum(add(y, y)))
        np.testing.assert_array_equal(grads[x], [6.0, 6.0])

    def test_matmul_against_central_differences(self, rng):
        for _ in range(5):
            a0 = rng.standard_normal((4, 3))
            b0 = rng.standard_normal((3, 2))
            a, b = Tensor(a0, requires_grad=True), Tensor(b0, requires_grad=True)
            grads = backward(tensor_sum(mul(matmul(a, b), matmul(a, b))))

            def loss_a(arr):
                return float(np.sum((arr @ b0) ** 2))

            def loss_b(arr):
                return float(np.sum((a0 @ arr) ** 2))

            np.testing.assert_allclose(grads[a], central_difference(loss_a, a0, 1e-4), atol=1e-5)
            np.testing.assert_allclose(grads[b], central_difference(loss_b, b0, 1e-4), atol=1e-5)

    def test_round_has_zero_gradient(self):
        x = Tensor([0.3, 1.7], requires_grad=True)
        grads = backward(tensor_sum(add(round_half_even(x), x)))
        np.testing.assert_array_equal(grads[x], [1.0, 1.0])

    def test_heaviside_surrogate_window(self):
        v = Tensor([-0.6, -0.5, 0.0, 0.4, 0.7], requires_grad=True)
        grads = backward(tensor_sum(heaviside(v, surrogate_width=0.5)))
        np.testing.assert_array_equal(grads[v], [0.0, 1.0, 1.0, 1.0, 0.0])

    def test_expand_take_stack_reshape(self):
        b = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        wide = expand(reshape(b, (1, 3)), (4, 3))
        grads = backward(tensor_sum(wide))
        np.testing.assert_array_equal(grads[b], [4.0, 4.0, 4.0])

        x = Tensor(np.arange(12.0).reshape(3, 2, 2), requires_grad=True)
        picked = stack([take(x, 2), take(x, 0)])
        grads = backward(tensor_sum(mean(picked, axis=0)))
        want = np.zeros((3, 2, 2))
        want[0] = want[2] = 0.5
        np.testing.assert_array_equal(grads[x], want)

    def test_cross_entropy_gradient(self, rng):
        z0 = rng.standard_normal((5, 3))
        labels = np.array([0, 2, 1, 1, 0])
        z = Tensor(z0, requires_grad=True)
        grads = backward(cross_entropy(z, labels))
        p = np.exp(z0) / np.exp(z0).sum(axis=1, keepdims=True)
        p[np.arange(5), labels] -= 1.0
        np.testing.assert_allclose(grads[z], p / 5, atol=1e-12)

    def test_backward_needs_scalar(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ContractError):
            backward(mul(x, x))

    def test_repeat_passes_are_bitwise_equal(self, rng):
        w0 = rng.standard_normal((3, 4))
        x0 = rng.standard_normal((6, 4))

        def run():
            w = Tensor(w0, requires_grad=True)
            return backward(cross_entropy(matmul(Tensor(x0), w.transpose()), np.arange(6) % 3))[w]

        np.testing.assert_array_equal(run(), run())

    def test_no_grad_builds_no_tape(self):
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            y = mul(x, x)
        assert not y.requires_grad
        assert y.parents == ()
        assert mul(x, x).op == OpKind.MUL
