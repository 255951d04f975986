# tests/test_oscillator.py
"""
Unit tests for the superquadratic oscillator: generalized trigonometric
functions, action-angle chart, forcing, rescaling, Hamiltonian assembly and
simulation.
Run with: pytest tests/test_oscillator.py -v
"""
import math

import numpy as np
import pytest

from approx import ApproxFunction, SequenceSchedule
from apseries import AlmostPeriodicFunction, Frequency
from errors import ConfigValidationError, DegenerateJacobian, Divergence, GateFailed, OriginExcluded
from lattice import IndexWindow
from oscillator import (
    ActionAngleChart,
    ForcingSpec,
    build_hamiltonian,
    gen_trig,
    h0,
    period,
    rescale,
    simulate,
)

OMEGA = Frequency(IndexWindow(0, 1), (1.0, math.sqrt(2.0)))


@pytest.fixture
def forcing():
    """p0 = cos(t) + cos(sqrt2 t), p1 = 0.5 cos((1 + sqrt2) t) at eps = 1e-6"""
    return ForcingSpec.from_dict(
        {
            "l": 1,
            "epsilon": 1e-6,
            "window": [0, 1],
            "omega": list(OMEGA.values),
            "coefficients": {
                "0": {"cosines": [[[1, 0], 1.0], [[0, 1], 1.0]]},
                "1": {"cosines": [[[1, 1], 0.5]]},
            },
        }
    )


@pytest.fixture
def unforced():
    return ForcingSpec(l=1, frequency=OMEGA)


class TestPeriod:
    """Tests for the minimal period"""

    def test_harmonic(self):
        assert period(0) == pytest.approx(2.0 * math.pi, rel=1e-12)

    def test_cubic(self):
        assert period(1) == pytest.approx(7.41630, abs=1e-5)

    def test_grows_with_l(self):
        values = [period(l) for l in range(4)]
        assert values == sorted(values)

    @pytest.mark.parametrize("l", [-1, 1.5])
    def test_invalid(self, l):
        with pytest.raises(ConfigValidationError):
            period(l)


class TestGenTrig:
    """Tests for C and S"""

    def test_l0_is_cosine(self):
        trig = gen_trig(0)
        t = np.linspace(0.0, 20.0, 41)
        np.testing.assert_allclose(trig.C(t), np.cos(t), atol=1e-10)
        np.testing.assert_allclose(trig.S(t), -np.sin(t), atol=1e-10)

    @pytest.mark.parametrize("l", [0, 1, 2, 3])
    def test_properties(self, l):
        trig = gen_trig(l)
        report = trig.check_properties(samples=200, seed=7)
        assert set(report) == {
            "initial",
            "energy_table",
            "energy_random",
            "parity",
            "periodicity",
            "derivative",
        }
        assert max(report.values()) <= 1e-10

    def test_quarter_period_zero(self):
        trig = gen_trig(1)
        assert float(trig.C(trig.period / 4)) == pytest.approx(0.0, abs=1e-12)
        assert float(trig.S(trig.period / 4)) == pytest.approx(-1.0 / math.sqrt(2.0))

    def test_harmonics_of_cosine(self):
        orders, coeffs = gen_trig(0).harmonics(1)
        lookup = dict(zip(orders.tolist(), coeffs.tolist()))
        assert lookup[1] == pytest.approx(0.5, abs=1e-10)
        assert lookup[-1] == pytest.approx(0.5, abs=1e-10)
        assert all(abs(c) < 1e-10 for k, c in lookup.items() if abs(k) != 1)

    def test_odd_power_has_odd_harmonics(self):
        orders, coeffs = gen_trig(1).harmonics(3, cap=12)
        assert np.all(np.abs(orders) <= 12)
        even = np.abs(coeffs[orders % 2 == 0])
        assert even.size == 0 or even.max() < 1e-10

    def test_rows(self):
        rows = gen_trig(1).rows(step=1024)
        assert len(rows) == 5
        assert rows[0] == (0.0, 1.0, 0.0)

    def test_sample_count(self):
        with pytest.raises(ConfigValidationError):
            gen_trig(1, samples=10)


class TestActionAngleChart:
    """Tests for the symplectic chart"""

    @pytest.fixture
    def chart(self):
        return ActionAngleChart.for_l(1)

    def test_frequency_at_unit_action(self, chart):
        assert float(chart.frequency_of_action(1.0)) == pytest.approx(1.15635, abs=1e-4)

    def test_jacobian_is_symplectic(self, chart):
        rng = np.random.default_rng(11)
        points = zip(rng.uniform(0.2, 3.0, 100), rng.uniform(0.0, 2.0 * math.pi, 100))
        worst = max(abs(np.linalg.det(chart.jacobian(rho, phi)) - 1.0) for rho, phi in points)
        assert worst <= 1e-8

    def test_inverse_round_trip(self, chart):
        for rho, phi in [(1.0, 0.7), (0.3, 4.0), (2.5, 6.0)]:
            u, v = chart.forward(rho, phi)
            rho_back, phi_back = chart.inverse(float(u), float(v))
            assert rho_back == pytest.approx(rho, rel=1e-10)
            assert phi_back == pytest.approx(phi, abs=1e-9)

    def test_energy_on_level_sets(self, chart):
        phi = np.linspace(0.0, 2.0 * math.pi, 13)
        u, v = chart.forward(np.full_like(phi, 1.7), phi)
        np.testing.assert_allclose(h0(u, v, 1), float(chart.energy(1.7)), rtol=1e-9)

    def test_frequency_inverse_and_twist(self, chart):
        w = float(chart.frequency_of_action(2.0))
        assert float(chart.action_of_frequency(w)) == pytest.approx(2.0)
        step = 1e-5
        numeric = (chart.frequency_of_action(2.0 + step) - chart.frequency_of_action(2.0 - step)) / (2 * step)
        assert float(chart.nondegeneracy(2.0)) == pytest.approx(float(numeric), rel=1e-6)
        assert float(chart.nondegeneracy(2.0)) > 0

    def test_harmonic_chart(self):
        chart = ActionAngleChart.for_l(0)
        assert chart.c1 == pytest.approx(2.0)
        assert float(chart.frequency_of_action(3.0)) == pytest.approx(1.0)
        assert float(chart.energy(3.0)) == pytest.approx(3.0)
        with pytest.raises(DegenerateJacobian):
            chart.action_of_frequency(1.0)

    def test_origin_excluded(self, chart):
        with pytest.raises(OriginExcluded):
            chart.inverse(0.0, 0.0)
        with pytest.raises(OriginExcluded):
            chart.forward(0.0, 1.0)

    def test_invalid_window(self):
        with pytest.raises(ConfigValidationError):
            ActionAngleChart(gen_trig(1), action_window=(2.0, 1.0))


class TestForcing:
    """Tests for the forcing specification and the rescaling"""

    def test_from_dict(self, forcing):
        assert forcing.l == 1
        assert not forcing.is_unforced
        assert float(forcing.p(0)(0.0)) == pytest.approx(2.0)
        assert float(forcing.p(2)(1.0)) == 0.0
        assert forcing.coefficient_values(np.array([0.0, 1.0])).shape == (2, 3)

    def test_force(self, forcing, unforced):
        assert unforced.force(2.0, 0.3) == -8.0
        expected = -8.0 + float(forcing.p(0)(0.3)) + 2.0 * float(forcing.p(1)(0.3))
        assert forcing.force(2.0, 0.3) == pytest.approx(expected)

    def test_round_trip(self, forcing):
        again = ForcingSpec.from_dict(forcing.to_dict())
        t = np.linspace(0.0, 5.0, 11)
        np.testing.assert_allclose(again.coefficient_values(t), forcing.coefficient_values(t))

    def test_validation(self):
        with pytest.raises(ConfigValidationError):
            ForcingSpec(l=1, frequency=OMEGA, coefficients={3: AlmostPeriodicFunction.constant(OMEGA, 1.0)})
        with pytest.raises(ConfigValidationError):
            ForcingSpec(l=1, frequency=OMEGA, epsilon=0.0)
        one_sided = AlmostPeriodicFunction(OMEGA, np.array([[1, 0]]), np.array([1.0]))
        with pytest.raises(ConfigValidationError):
            ForcingSpec(l=1, frequency=OMEGA, coefficients={0: one_sided})
        with pytest.raises(ConfigValidationError):
            ForcingSpec.from_dict({"l": 1, "window": [0, 1]})

    def test_rescale(self):
        spec = ForcingSpec(
            l=1,
            frequency=OMEGA,
            coefficients={0: AlmostPeriodicFunction.from_cosines(OMEGA, [([1, 0], 1.0)])},
            epsilon=1e-2,
        )
        system = rescale(spec)

        assert system.omega_hat.values == pytest.approx((1e-2, 1e-2 * math.sqrt(2.0)))
        assert system.coefficient_scale(0) == pytest.approx(1e-6)
        # p_0 of the slow system at tau equals eps^3 p_0(eps tau)
        tau = 3.0
        assert float(system.spec.p(0)(tau)) == pytest.approx(1e-6 * float(spec.p(0)(1e-2 * tau)))
        slow = system.to_slow_state(2.0, 0.5, -0.25)
        assert system.to_original_state(*slow) == pytest.approx((2.0, 0.5, -0.25))


class TestBuildHamiltonian:
    """Tests for the KAM Hamiltonian around an action"""

    def test_diagnostics(self, forcing):
        result = build_hamiltonian(forcing)

        assert result.s == pytest.approx(1e-3)
        assert result.norm > 0
        assert result.constant_estimate == pytest.approx(result.norm / 1e-6)
        assert result.E0 is None and result.gate_passed is None
        data = result.to_dict()
        assert data["omega_tilde"] == pytest.approx([1.15635], abs=1e-4)
        assert data["omega_hat"] == pytest.approx([1e-6, 1e-6 * math.sqrt(2.0)])
        assert data["modes"] == result.hamiltonian.perturbation.size

    def test_normal_form_energy(self, forcing):
        result = build_hamiltonian(forcing, rho0=2.0)
        chart = ActionAngleChart.for_l(1)
        assert result.hamiltonian.normal.e.tolist() == pytest.approx([float(chart.energy(2.0))])

    def test_gate_reported(self, forcing):
        result = build_hamiltonian(
            forcing,
            delta=ApproxFunction(kind="power-exp", sigma=0.5),
            sequences=SequenceSchedule(mu_total=0.5, rho_total=0.125, decay="inverse-square"),
            enforce_gate=False,
        )
        assert result.E0 > 0
        assert result.gate_passed == (result.scaled_norm <= result.E0)
        assert result.to_dict()["E0"] == result.E0

    def test_gate_enforced_by_default(self, forcing):
        with pytest.raises(GateFailed) as exc_info:
            build_hamiltonian(
                forcing,
                delta=ApproxFunction(kind="power-exp", sigma=0.5),
                sequences=SequenceSchedule(mu_total=0.5, rho_total=0.125, decay="inverse-square"),
            )
        assert exc_info.value.context["inequality"] == "s^-1|||P||| <= E0"

    def test_gate_needs_sequences(self, forcing):
        with pytest.raises(ConfigValidationError, match="sequences"):
            build_hamiltonian(forcing, delta=ApproxFunction(kind="power-exp", sigma=0.5))

    def test_gate_surfaces_divergence(self, forcing):
        with pytest.raises(Divergence):
            build_hamiltonian(
                forcing,
                delta=ApproxFunction(kind="power-exp", sigma=0.5),
                sequences=SequenceSchedule(mu_total=0.5, rho_total=0.125, decay="geometric"),
                enforce_gate=False,
            )

    def test_structure_must_match(self, forcing):
        from lattice import ProductStructure, SpatialStructure

        window = IndexWindow(0, 0)
        structure = ProductStructure(SpatialStructure(window, (frozenset([0]),)), n=1)
        with pytest.raises(ConfigValidationError):
            build_hamiltonian(forcing, structure=structure)


class TestSimulate:
    """Tests for long-horizon integration"""

    def test_unforced_energy(self, unforced):
        result = simulate(unforced, 1.0, 0.0, T=10.0, dt=0.01, record_every=10)

        assert result.times.shape == (101,)
        assert result.times[-1] == pytest.approx(10.0)
        assert result.energy_drift < 1e-6
        assert result.sup == pytest.approx(1.0, abs=1e-6)
        # the slowest frequency is 1, so the section is sampled at 0 and 2 pi
        assert [row[0] for row in result.section_rows()] == [0, 1]
        assert result.section_rows()[0][2] == pytest.approx(1.0)

    def test_verlet_is_second_order(self, unforced):
        coarse = simulate(unforced, 1.0, 0.0, T=10.0, dt=0.02, integrator="verlet", record_every=50)
        fine = simulate(unforced, 1.0, 0.0, T=10.0, dt=0.01, integrator="verlet", record_every=100)
        ratio = coarse.energy_drift / fine.energy_drift
        assert 3.0 < ratio < 5.0

    def test_dop853_follows_trig(self, unforced):
        result = simulate(unforced, 1.0, 0.0, T=10.0, dt=0.5, integrator="dop853")
        trig = gen_trig(1)
        np.testing.assert_allclose(result.x, trig.C(result.times), atol=1e-9)
        assert result.energy_drift < 1e-10

    def test_forced_stays_bounded(self, forcing):
        result = simulate(forcing, 1.0, 0.0, T=50.0, dt=0.01, record_every=100)
        assert result.sup < 10.0
        assert len(result.trajectory_rows()) == 51
        assert result.metadata["section_frequency"] == pytest.approx(1.0)
        assert result.metadata["slow_forcing_frequency"] == pytest.approx([1e-6, 1e-6 * math.sqrt(2.0)])

    @pytest.mark.parametrize(
        "kwargs",
        [{"dt": 0.0}, {"T": -1.0}, {"integrator": "euler"}, {"record_every": 0}],
    )
    def test_invalid(self, unforced, kwargs):
        args = {"T": 1.0, "dt": 0.01}
        args.update(kwargs)
        with pytest.raises(ConfigValidationError):
            simulate(unforced, 1.0, 0.0, **args)

    @pytest.mark.slow
    def test_long_horizon_amplitude(self, forcing):
        short = simulate(forcing, 1.0, 0.0, T=1e3, dt=0.01, record_every=100)
        result = simulate(forcing, 1.0, 0.0, T=1e5, dt=0.01, record_every=1000)
        assert result.sup <= 1.5 * short.sup
        assert abs(result.drift_slope) < 1e-6


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
