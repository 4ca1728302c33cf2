import numpy as np
import pytest

from spikekit.errors import ContractError
from spikekit.gradcheck import (
    NETWORK_KINDS,
    central_difference,
    check_network_gradients,
    check_smooth_ops,
    check_ste_indicators,
    oracle_backward_alpha,
    run_all,
)


class TestCentralDifference:
    def test_quadratic(self):
        grad = central_difference(lambda x: float(np.sum(x ** 2)), np.array([1.0, -2.0]), 1e-5)
        np.testing.assert_allclose(grad, [2.0, -4.0], atol=1e-8)

    def test_leaves_input_untouched(self):
        x = np.array([0.5, 0.25])
        central_difference(lambda a: float(a.sum()), x, 1e-3)
        np.testing.assert_array_equal(x, [0.5, 0.25])


class TestAudits:
    def test_oracle_example(self):
        got = oracle_backward_alpha(np.array([0.5, -0.2, 0.3]), np.array([-1.0, 2.0, 7.0]), 0.0, 4, 1.0, 1.0)
        assert got == pytest.approx(0.8)

    def test_ste_indicators_match_exactly(self):
        result = check_ste_indicators(trials=200, seed=3)
        assert result.passed
        assert result.max_deviation <= 1e-12

    def test_smooth_ops(self):
        assert check_smooth_ops(trials=3).passed

    @pytest.mark.parametrize("kind", NETWORK_KINDS)
    def test_network_gradients(self, kind):
        result = check_network_gradients(kind, trials=2, seed=1)
        assert result.passed, result.max_deviation

    def test_coarse_eps_fails(self):
        assert not check_smooth_ops(trials=2, eps=10.0).passed

    def test_zero_trials_is_an_error(self):
        with pytest.raises(ContractError):
            run_all(trials=0)

    def test_unsupported_kind(self):
        with pytest.raises(ContractError):
            check_network_gradients("psn", trials=1)

    def test_run_all_reports_three_checks(self):
        results = run_all(trials=1)
        assert [r.name for r in results] == ["ste_indicators", "smooth_ops", "network_gradients[asn]"]
        assert all(r.passed for r in results)


def test_indicator_audit_at_scale():
    result = check_ste_indicators(trials=1000, seed=11, size=100)
    assert result.passed
    assert result.checked == 1000
