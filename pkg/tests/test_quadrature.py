# tests/test_quadrature.py
"""
Unit tests for the tanh-sinh quadrature on [0, 1].
Run with: pytest tests/test_quadrature.py -v
"""
import math

import numpy as np
import pytest

from errors import QuadratureStall
from quadrature import integrate_unit, tanh_sinh_rule


class TestRule:
    """Tests for the abscissae and weights"""

    def test_nodes_inside_interval(self):
        u, one_minus_u, w = tanh_sinh_rule(0.25)
        assert np.all(u > 0) and np.all(u < 1)
        np.testing.assert_allclose(u + one_minus_u, 1.0, rtol=0, atol=1e-15)
        assert np.all(w >= 0)

    def test_weights_sum_to_length(self):
        _, _, w = tanh_sinh_rule(0.125)
        assert w.sum() == pytest.approx(1.0, rel=1e-12)

    def test_symmetric(self):
        u, one_minus_u, w = tanh_sinh_rule(0.5)
        np.testing.assert_allclose(u, one_minus_u[::-1])
        np.testing.assert_allclose(w, w[::-1])


class TestIntegrateUnit:
    """Tests for adaptive integration"""

    @pytest.mark.parametrize(
        "f, expected",
        [
            (lambda u, v: np.ones_like(u), 1.0),
            (lambda u, v: u**2, 1.0 / 3.0),
            (lambda u, v: np.cos(u), math.sin(1.0)),
            (lambda u, v: np.log(u), -1.0),
        ],
    )
    def test_smooth_and_log(self, f, expected):
        assert integrate_unit(f) == pytest.approx(expected, rel=1e-12, abs=1e-13)

    def test_endpoint_singularity(self):
        # the second argument keeps (1-u)**(-1/2) accurate near u = 1
        assert integrate_unit(lambda u, v: v**-0.5) == pytest.approx(2.0, rel=1e-12)

    def test_two_sided_singularity(self):
        value = integrate_unit(lambda u, v: 1.0 / np.sqrt(u * v))
        assert value == pytest.approx(math.pi, rel=1e-12)

    def test_stall(self):
        with pytest.raises(QuadratureStall) as exc_info:
            integrate_unit(lambda u, v: u, max_level=1)
        assert exc_info.value.context["estimate"] == pytest.approx(0.5, rel=1e-2)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
