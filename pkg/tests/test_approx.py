# tests/test_approx.py
"""
Unit tests for approximation functions, Gamma bounds and Psi products.
Run with: pytest tests/test_approx.py -v
"""
import math

import numpy as np
import pytest

from approx import (
    ApproxFunction,
    SequenceSchedule,
    check_delta_properties,
    default_delta,
    gamma0,
    gamma1,
    gamma_ratio_diagnostic,
    kappa_sequence,
    mu_sequence,
    partial_psi,
    psi_factors,
    psi_product,
    rho_sequence,
)
from errors import ConfigValidationError, Divergence, PropertyViolation


@pytest.fixture
def power_exp():
    """Delta(t) = exp(sqrt(t))"""
    return ApproxFunction(kind="power-exp", sigma=0.5)


@pytest.fixture
def constant():
    """Delta identically 1"""
    return ApproxFunction.constant()


class TestApproxFunction:
    """Tests for the approximation function kinds"""

    def test_default_formula(self):
        delta = default_delta()
        assert delta(0.0) == 1.0
        t = 10.0
        assert float(delta.log_delta(t)) == pytest.approx(t / (1.0 + math.log(11.0)) ** 2)

    def test_vectorized(self, power_exp):
        values = power_exp(np.array([0.0, 1.0, 4.0]))
        np.testing.assert_allclose(values, [1.0, math.e, math.e**2])

    def test_table_interpolates_logs(self):
        delta = ApproxFunction(kind="table", knots=((0.0, 1.0), (2.0, math.e**2)))
        assert float(delta(1.0)) == pytest.approx(math.e)
        # constant beyond the last knot
        assert float(delta(5.0)) == pytest.approx(math.e**2)

    def test_constant(self, constant):
        np.testing.assert_array_equal(constant(np.array([0.0, 3.0, 1e6])), [1.0, 1.0, 1.0])

    @pytest.mark.parametrize(
        "data",
        [
            {"kind": "gaussian"},
            {"kind": "power-exp", "sigma": 1.0},
            {"kind": "table"},
            {"kind": "table", "knots": [[1.0, 1.0]]},
            {"kind": "table", "knots": [[0.0, 1.0], [1.0, 0.0]]},
        ],
    )
    def test_invalid(self, data):
        with pytest.raises(ConfigValidationError):
            ApproxFunction.from_dict(data)

    def test_round_trip(self, power_exp):
        assert power_exp.to_dict() == {"kind": "power-exp", "sigma": 0.5}
        assert ApproxFunction.from_dict(power_exp.to_dict()) == power_exp
        table = ApproxFunction.constant()
        assert ApproxFunction.from_dict(table.to_dict()) == table


class TestGamma:
    """Tests for Gamma0 and Gamma1"""

    @pytest.mark.parametrize("mu", [0.25, 1.0, 2.0])
    def test_gamma0_power_exp(self, power_exp, mu):
        # sup sqrt(t) - mu t is attained at t = 1/(4 mu^2)
        assert gamma0(power_exp, mu) == pytest.approx(math.exp(1.0 / (4.0 * mu)), rel=1e-8)

    def test_gamma_constant_delta(self, constant):
        assert gamma0(constant, 0.3) == pytest.approx(1.0)
        # sup (1+t) e^{-rho t} = e^{rho-1}/rho for rho < 1
        assert gamma1(constant, 0.5) == pytest.approx(2.0 * math.exp(-0.5), rel=1e-8)
        assert gamma1(constant, 2.0) == pytest.approx(1.0)

    def test_gamma_monotone_in_rate(self):
        delta = default_delta()
        values = [gamma0(delta, mu) for mu in (0.5, 1.0, 2.0, 4.0)]
        assert values == sorted(values, reverse=True)
        assert all(v >= 1.0 for v in values)

    def test_nonpositive_rate(self, power_exp):
        with pytest.raises(ConfigValidationError):
            gamma0(power_exp, 0.0)
        with pytest.raises(ConfigValidationError):
            gamma1(power_exp, -1.0)

    def test_ratio_diagnostic_reports_failure(self, constant):
        g0, rg1, holds = gamma_ratio_diagnostic(constant, 0.5)
        assert g0 == pytest.approx(1.0)
        assert rg1 == pytest.approx(math.exp(-0.5), rel=1e-8)
        assert holds is False

    def test_ratio_diagnostic_default(self):
        _, _, holds = gamma_ratio_diagnostic(default_delta(), 2.0)
        assert holds is True


class TestSequences:
    """Tests for kappa_nu, mu_nu and rho_nu"""

    def test_kappa_sums_to_one(self):
        assert sum(kappa_sequence(1.5, nu) for nu in range(200)) == pytest.approx(1.0)

    def test_geometric_sums(self):
        schedule = SequenceSchedule(mu_total=2.0, rho_total=1.0)
        assert sum(mu_sequence(schedule, 80)) == pytest.approx(2.0)
        assert sum(rho_sequence(schedule, 80)) == pytest.approx(1.0)
        assert schedule.mu_spent(3) == pytest.approx(sum(mu_sequence(schedule, 3)))
        assert schedule.rho(0) == pytest.approx(0.5)

    def test_inverse_square(self):
        schedule = SequenceSchedule(mu_total=2.0, rho_total=2.0, decay="inverse-square")
        assert schedule.mu(0) == pytest.approx(12.0 / math.pi**2)
        assert schedule.mu(1) == pytest.approx(schedule.mu(0) / 4.0)
        assert schedule.rho_spent(5000) == pytest.approx(2.0, rel=1e-3)
        assert schedule.mu_spent(4) < 2.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"mu_total": 0.0, "rho_total": 1.0},
            {"mu_total": 1.0, "rho_total": 1.0, "kappa": 1.0},
            {"mu_total": 1.0, "rho_total": 1.0, "decay_q": 1.0},
            {"mu_total": 1.0, "rho_total": 1.0, "decay": "harmonic"},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigValidationError):
            SequenceSchedule(**kwargs)


class TestPsi:
    """Tests for the Psi0 * Psi1 product"""

    def test_constant_delta_converges(self, constant):
        schedule = SequenceSchedule(mu_total=0.5, rho_total=0.25)
        result = psi_factors(constant, schedule)

        assert result.log_psi0 == pytest.approx(0.0, abs=1e-12)
        assert result.log_psi1 > 0.0
        assert result.tail_estimate < 1e-12
        assert psi_product(constant, schedule) == pytest.approx(result.product)

    def test_partial_product_matches(self, power_exp):
        schedule = SequenceSchedule(mu_total=2.0, rho_total=2.0, decay="inverse-square")
        result = psi_factors(power_exp, schedule)

        assert partial_psi(power_exp, schedule, result.terms) == pytest.approx(result.log_product)
        refined = partial_psi(power_exp, schedule, result.terms + 20)
        assert abs(refined - result.log_product) < 1e-9
        assert result.psi0 * result.psi1 == pytest.approx(result.product)

    def test_geometric_power_exp_diverges(self, power_exp):
        # log Gamma0(mu_nu) doubles per step while kappa_nu shrinks by 2/3
        schedule = SequenceSchedule(mu_total=1.0, rho_total=1.0)
        with pytest.raises(Divergence):
            psi_factors(power_exp, schedule)


class TestDeltaProperties:
    """Tests for the approximation-function property checks"""

    def test_default_passes(self):
        report = check_delta_properties(default_delta(), t_max=1e5)
        assert report.passed
        assert report.block_ratios
        assert all(r < 1.0 for r in report.block_ratios)

    def test_power_exp_passes(self, power_exp):
        assert check_delta_properties(power_exp, t_max=1e4).passed

    def test_decreasing_table_fails(self):
        delta = ApproxFunction(kind="table", knots=((0.0, 1.0), (1.0, 3.0), (2.0, 2.0)))
        report = check_delta_properties(delta, t_max=10.0)
        assert not report.nondecreasing
        assert not report.passed
        with pytest.raises(PropertyViolation):
            check_delta_properties(delta, t_max=10.0, strict=True)

    def test_value_at_zero(self):
        delta = ApproxFunction(kind="table", knots=((0.0, 2.0),))
        assert not check_delta_properties(delta, t_max=10.0).at_zero


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
