"""
Tests for bulk curvature from metric jets.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from exhol import jets
from exhol.curvature import (
    MetricJet,
    bianchi_residual,
    christoffel,
    cotton_divergence_residual,
    curvature_stack,
    metric_compatibility_residual,
    weyl_trace_residual,
)
from exhol.exceptions import DimensionError, JetOrderError, SceneError
from exhol.jets import JetSeries


def conformally_flat(base, order, factor):
    """Metric factor(x) * δ as a MetricJet."""
    x = JetSeries.variables(base, order)
    return MetricJet.from_jet(factor(x) * np.eye(len(base)))


def round_sphere(x):
    """Stereographic unit sphere, 4 / (1 + |x|^2)^2."""
    r2 = jets.jet_einsum("a,a->", x, x)
    return 4.0 / ((1.0 + r2) * (1.0 + r2))


def generic_metric(base, order):
    """δ_ab + 0.2 x_a x_b + 0.1 sin(x_0) δ_ab, positive near the origin."""
    x = JetSeries.variables(base, order)
    d = len(base)
    outer = jets.jet_einsum("a,b->ab", x, x)
    return MetricJet.from_jet(outer * 0.2 + (1.0 + 0.1 * jets.sin(x[0])) * np.eye(d))


class TestMetricJet:
    """Test suite for metric validation."""

    def test_inverse(self):
        """Test that the stored inverse inverts the metric to every order."""
        metric = generic_metric([0.1, -0.2, 0.3], 4)

        assert metric.identity_residual() < 1e-12
        assert metric.dimension == 3

    def test_rejects_asymmetric(self):
        """Test that an asymmetric metric raises SceneError."""
        x = JetSeries.variables([0.0, 0.0, 0.0], 2)
        skew = jets.jet_einsum("a,b->ab", x, np.array([1.0, 0.0, 0.0]))

        with pytest.raises(SceneError):
            MetricJet.from_jet(skew + np.eye(3))

    def test_rejects_indefinite(self):
        """Test that a non-positive metric raises SceneError."""
        x = JetSeries.variables([0.0, 0.0, 0.0], 2)

        with pytest.raises(SceneError):
            MetricJet.from_jet(x[0] * 0.0 + np.diag([1.0, -1.0, 1.0]))

    def test_rescaled(self):
        """Test that rescaling multiplies by Ω²."""
        metric = generic_metric([0.1, 0.0, 0.0], 3)
        x = JetSeries.variables([0.1, 0.0, 0.0], 3)
        omega = jets.exp(0.5 * x[1])

        rescaled = metric.rescaled(omega)
        assert_allclose(rescaled.metric.value, metric.metric.value)


class TestCurvatureStack:
    """Test suite for Riemann, Schouten, Weyl and Cotton."""

    def test_flat_metric_is_flat(self):
        """Test that the Euclidean metric has vanishing curvature."""
        x = JetSeries.variables([0.3, 0.1, -0.4, 0.2], 4)
        stack = curvature_stack(MetricJet.from_jet(x[0] * 0.0 + np.eye(4)))

        assert stack.riemann.max_abs() == 0.0
        assert stack.J.max_abs() == 0.0

    def test_round_sphere_constants(self):
        """Test that the unit sphere has scalar curvature d(d-1) and J = d/2."""
        stack = curvature_stack(conformally_flat([0.0, 0.0, 0.0], 4, round_sphere))

        assert float(stack.scalar.value) == pytest.approx(6.0)
        assert float(stack.J.value) == pytest.approx(1.5)
        g = stack.metric.metric.value
        assert_allclose(stack.schouten.value, 0.5 * g, atol=1e-12)

    def test_conformally_flat_weyl_vanishes(self):
        """Test that e^{2φ}δ has zero Weyl tensor in d = 4."""
        metric = conformally_flat(
            [0.1, 0.2, 0.0, -0.1], 4, lambda x: jets.exp(0.4 * x[0] - 0.2 * x[2] * x[3])
        )
        stack = curvature_stack(metric)

        assert stack.weyl.max_abs() < 1e-10

    def test_generic_identities(self):
        """Test Bianchi, metric compatibility, Weyl trace and Cotton divergence."""
        metric = generic_metric([0.1, -0.1, 0.2, 0.05], 5)
        stack = curvature_stack(metric)

        assert metric_compatibility_residual(metric, christoffel(metric)) < 1e-10
        assert bianchi_residual(stack) < 1e-10
        assert weyl_trace_residual(stack) < 1e-10
        assert cotton_divergence_residual(stack) < 1e-8
        assert stack.weyl.max_abs() > 1e-3

    def test_weyl_conformal_weight(self):
        """Test that the lowered Weyl tensor rescales by Ω² at the base point."""
        base = [0.1, -0.1, 0.2, 0.05]
        metric = generic_metric(base, 4)
        x = JetSeries.variables(base, 4)
        omega = jets.exp(0.3 * x[0] + 0.2 * x[3])

        original = curvature_stack(metric, with_cotton=False)
        rescaled = curvature_stack(metric.rescaled(omega), with_cotton=False)
        factor = float(omega.value) ** 2
        assert_allclose(rescaled.weyl.value, factor * original.weyl.value, atol=1e-10)

    def test_cotton_skipped_in_three_dimensions(self):
        """Test that the Cotton divergence check is vacuous in d = 3."""
        stack = curvature_stack(generic_metric([0.0, 0.1, 0.0], 4))

        assert stack.cotton is not None
        assert cotton_divergence_residual(stack) == 0.0

    def test_two_dimensions_rejected(self):
        """Test that d = 2 raises DimensionError."""
        with pytest.raises(DimensionError):
            curvature_stack(generic_metric([0.0, 0.0], 4))

    def test_order_requirements(self):
        """Test that the Cotton tensor needs jet order three."""
        with pytest.raises(JetOrderError):
            curvature_stack(generic_metric([0.0, 0.0, 0.0], 2))
