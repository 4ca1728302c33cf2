"""Clip-round quantizer: forward values and the two straight-through rules."""

import numpy as np
import pytest

from spikekit.errors import ContractError
from spikekit.gradcheck import oracle_backward_alpha, oracle_backward_x
from spikekit.quantizers import (
    CONTINUOUS,
    QuantizerSpec,
    emitted_levels,
    pass_through_mask,
    quantize,
    quantize_backward_alpha,
    quantize_backward_x,
    quantize_forward,
)
from spikekit.tensor import Tensor, backward, mul, tensor_sum


class TestForward:
    def test_rounds_inside_window(self):
        assert quantize_forward(2.3, QuantizerSpec(alpha=0, d=4)) == 2.0

    def test_shifted_floor(self):
        # round(0.2) = 0 is lifted to ceil(alpha) = 1
        assert quantize_forward(0.2, QuantizerSpec(alpha=1, d=2)) == 1.0

    def test_normalized_output(self):
        assert quantize_forward(2.0, QuantizerSpec(alpha=0, d=4, n=4)) == 0.5

    def test_zero_fixed_point(self):
        for alpha in (-3.5, -1.0, 0.0):
            assert quantize_forward(0.0, QuantizerSpec(alpha=alpha, d=4)) == 0.0

    def test_fractional_alpha_window(self):
        spec = QuantizerSpec(alpha=-1.4, d=4)
        assert spec.clip_window() == (-1.0, 3.0)
        out = quantize_forward(np.array([-9.0, -1.2, 2.6, 3.4, 8.0]), spec)
        np.testing.assert_array_equal(out, [-1.0, -1.0, 3.0, 3.0, 3.0])

    def test_outputs_are_emitted_levels(self, rng):
        spec = QuantizerSpec(alpha=0.7, d=4, n=4)
        out = quantize_forward(rng.uniform(-10, 10, size=500), spec)
        assert set(np.unique(out)) <= set(emitted_levels(spec))
        assert len(emitted_levels(spec)) == 5

    def test_idempotent_when_unnormalized(self, rng):
        spec = QuantizerSpec(alpha=-2.0, d=4)
        once = quantize_forward(rng.uniform(-8, 8, size=200), spec)
        np.testing.assert_array_equal(quantize_forward(once, spec), once)

    def test_continuous_mode_clips_at_alpha(self):
        spec = QuantizerSpec(alpha=0.4, d=4, bound_mode=CONTINUOUS)
        assert quantize_forward(0.1, spec) == pytest.approx(0.4)
        assert quantize_forward(9.0, spec) == pytest.approx(4.4)

    @pytest.mark.parametrize("kwargs", [{"d": 0}, {"d": 2.5}, {"n": 0}, {"grad_scale": -1}, {"bound_mode": "soft"}])
    def test_rejects_bad_spec(self, kwargs):
        with pytest.raises(ContractError):
            QuantizerSpec(**kwargs)


class TestBackward:
    def test_x_rule_examples(self):
        spec = QuantizerSpec(alpha=0, d=4)
        assert quantize_backward_x(np.array([1.0]), np.array([2.0]), spec)[0] == 1.0
        assert quantize_backward_x(np.array([1.0]), np.array([5.1]), spec)[0] == 0.0
        assert quantize_backward_x(np.array([1.0]), np.array([2.0]), QuantizerSpec(d=4, n=4))[0] == 0.25

    def test_alpha_rule_example(self):
        spec = QuantizerSpec(alpha=0, d=4)
        got = quantize_backward_alpha(np.array([0.5, -0.2, 0.3]), np.array([-1.0, 2.0, 7.0]), spec)
        assert got == pytest.approx(0.8)

    def test_alpha_rule_vanishes_inside_window(self):
        spec = QuantizerSpec(alpha=0, d=4)
        assert quantize_backward_alpha(np.ones(3), np.array([0.0, 2.0, 4.0]), spec) == 0.0

    def test_grad_scale_is_linear(self):
        u, g = np.array([-1.0, 2.0, 7.0]), np.array([0.5, -0.2, 0.3])
        one = quantize_backward_alpha(g, u, QuantizerSpec(grad_scale=1.0))
        two = quantize_backward_alpha(g, u, QuantizerSpec(grad_scale=2.0))
        assert two == pytest.approx(2 * one)

    def test_window_uses_continuous_bounds(self):
        # ceil(0.3) = 1 clips forward, but u = 0.5 still passes gradient
        spec = QuantizerSpec(alpha=0.3, d=4)
        assert pass_through_mask(0.5, spec)
        assert not pass_through_mask(0.2, spec)
        assert quantize_forward(0.5, spec) == 1.0

    def test_boundaries_pass_through(self):
        spec = QuantizerSpec(alpha=-1.0, d=2)
        np.testing.assert_array_equal(pass_through_mask(np.array([-1.0, 1.0]), spec), [True, True])

    def test_indicators_partition_the_input(self, rng):
        spec = QuantizerSpec(alpha=0.6, d=4, n=4)
        u = rng.uniform(-5, 10, size=300)
        g = np.ones_like(u)
        inside = quantize_backward_x(g, u, spec) * spec.n
        outside = quantize_backward_alpha(g, u, spec) * spec.n
        assert inside.sum() + outside == pytest.approx(u.size)

    def test_vectorized_matches_scalar_loop(self, rng):
        for _ in range(200):
            d = int(rng.choice([1, 2, 4, 8]))
            n = float(rng.choice([1.0, d]))
            alpha = float(rng.uniform(-3, 3))
            spec = QuantizerSpec(alpha=alpha, d=d, n=n, grad_scale=0.5)
            u = rng.uniform(alpha - 2, alpha + d + 2, size=6)
            g = rng.standard_normal(6)
            np.testing.assert_array_equal(quantize_backward_x(g, u, spec), oracle_backward_x(g, u, alpha, d, n))
            assert quantize_backward_alpha(g, u, spec) == pytest.approx(
                oracle_backward_alpha(g, u, alpha, d, n, 0.5), abs=1e-12
            )

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            quantize_backward_x(np.ones(2), np.ones(3), QuantizerSpec())


class TestTapeNode:
    def test_node_matches_rules(self):
        spec = QuantizerSpec(alpha=0, d=4)
        u = Tensor([-1.0, 2.0, 7.0], requires_grad=True)
        alpha = Tensor(0.0, requires_grad=True)
        out = quantize(u, spec, alpha)
        np.testing.assert_array_equal(out.data, [0.0, 2.0, 4.0])
        grads = backward(tensor_sum(mul(out, Tensor([0.5, -0.2, 0.3]))))
        np.testing.assert_array_equal(grads[u], [0.0, -0.2, 0.0])
        assert float(grads[alpha]) == pytest.approx(0.8)

    def test_per_channel_alpha(self):
        spec = QuantizerSpec(alpha=0.0, d=2)
        u = Tensor([[-1.0, 1.0], [3.0, -4.0]], requires_grad=True)
        alpha = Tensor([0.0, -5.0], requires_grad=True)
        out = quantize(u, spec, alpha)
        np.testing.assert_array_equal(out.data, [[0.0, -3.0], [2.0, -4.0]])
        grads = backward(tensor_sum(out))
        # channel 0 window [0, 2], channel 1 window [-5, -3]
        np.testing.assert_array_equal(grads[alpha], [2.0, 1.0])

    def test_per_channel_width_mismatch(self):
        with pytest.raises(ContractError):
            quantize(Tensor(np.zeros((2, 3))), QuantizerSpec(), Tensor([0.0, 0.0]))


class TestSpecValue:
    def test_per_channel_specs_compare_by_value(self):
        a = QuantizerSpec(alpha=np.array([0.5, -1.0]), d=4)
        b = QuantizerSpec(alpha=np.array([0.5, -1.0]), d=4)
        c = QuantizerSpec(alpha=np.array([0.5, -2.0]), d=4)
        assert a == b
        assert a != c
        assert hash(a) == hash(b)

    def test_scalar_and_array_alpha_differ(self):
        assert QuantizerSpec(alpha=0.5) != QuantizerSpec(alpha=np.array([0.5, 0.5]))
        assert QuantizerSpec(alpha=0.5) == QuantizerSpec(alpha=0.5)


class TestMonotone:
    @pytest.mark.parametrize("alpha,n", [(0.0, 1.0), (-2.3, 1.0), (1.6, 4.0), (-0.5, 2.0)])
    def test_output_non_decreasing_in_input(self, alpha, n):
        spec = QuantizerSpec(alpha=alpha, d=4, n=n)
        x = np.linspace(-12.0, 12.0, 4001)
        out = quantize_forward(x, spec)
        assert np.all(np.diff(out) >= 0.0)

    @pytest.mark.parametrize("n", [1.0, 4.0])
    def test_alpha_gradient_grows_with_input_shift(self, n, rng):
        spec = QuantizerSpec(alpha=0.0, d=4, n=n)
        u = rng.uniform(0.05, 3.95, size=200)
        g = np.ones_like(u)
        grads = [quantize_backward_alpha(g, u + c, spec) for c in np.linspace(0.0, 3.5, 8)]
        assert grads[0] == 0.0
        assert np.all(np.diff(grads) > 0.0)
        assert quantize_backward_alpha(g, u + 6.0, spec) == pytest.approx(u.size / n)
