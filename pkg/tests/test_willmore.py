"""
Tests for the explicit Willmore invariant of surfaces.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from exhol.conformal import extract_willmore_holographic
from exhol.exceptions import DimensionError, JetOrderError, SceneError
from exhol.jets import JetSeries
from exhol.submanifold import Scene, build_frame
from exhol.utils.serialization import load_bundled_scene, load_expected
from exhol.willmore import (
    NORMALIZATION,
    WILLMORE_WEIGHT,
    classical_willmore,
    conformal_covariance_check,
    hypersurface_willmore,
    iv_invariant,
    surface_terms,
    willmore_explicit,
)


def bundled(name, jet_order=None):
    return load_bundled_scene(name).to_scene(jet_order)


@pytest.fixture(scope="module")
def expected():
    """Expected values for the bundled scenes."""
    return load_expected()


class TestExplicitFormula:
    """Test suite for the closed-form Willmore trace."""

    def test_sphere_vanishes(self, expected):
        """Test that the round sphere has zero Willmore trace."""
        values = expected["sphere"]["willmore"]
        report = willmore_explicit(bundled("sphere"))

        assert_allclose(report.total, values["total"], atol=values["tolerance"])
        assert report.weight == WILLMORE_WEIGHT
        assert report.normalization == NORMALIZATION

    def test_flat_plane_vanishes(self, expected):
        """Test that a flat plane in R^4 has zero Willmore trace in both normals."""
        values = expected["flat_plane"]["willmore"]
        report = willmore_explicit(bundled("flat_plane"))

        assert_allclose(report.total, values["total"], atol=values["tolerance"])

    def test_cubic_term_drops_out(self):
        """Test that II̊³ vanishes for surfaces, so total and simplified agree."""
        report = willmore_explicit(bundled("curved_d4"))

        assert_allclose(report.cubic_term, 0.0, atol=1e-10)
        assert_allclose(report.total, report.simplified, atol=1e-10)

    def test_torus_has_no_beta_contributions(self, expected):
        """Test that the torus in its adapted frame has β = 0, so every β group vanishes."""
        values = expected["torus_r4"]["willmore"]
        report = willmore_explicit(bundled("torus_r4"))

        for name in (
            "beta_derivative",
            "beta_quadratic_trace",
            "beta_quadratic_mixed",
            "beta_weyl_mixed",
            "beta_weyl_trace",
            "beta_invariant",
        ):
            assert_allclose(getattr(report, name), values["beta_groups"], atol=values["tolerance"])

    def test_report_serializes(self):
        """Test that the report dumps to plain JSON types."""
        dumped = willmore_explicit(bundled("sphere")).model_dump(mode="json")

        assert dumped["weight"] == -3
        assert isinstance(dumped["total"], list)


class TestClassicalComparison:
    """Test suite for surfaces in flat R^3."""

    def test_ellipsoid_matches_classical(self, expected):
        """Test the explicit trace against -(1/6)(Δ̄H + 2H(H² - K)) on an ellipsoid."""
        scene = bundled("ellipsoid")
        frame = build_frame(scene)
        report = willmore_explicit(scene, frame)

        classical = classical_willmore(scene, orientation=frame.normals.value[0])

        assert abs(classical) > 1e-4
        assert report.total[0] == pytest.approx(classical, abs=expected["ellipsoid"]["willmore"]["classical_tolerance"])

    def test_hypersurface_expression(self):
        """Test that at d = 3 the full formula reduces to -(1/6) L·II̊."""
        scene = bundled("ellipsoid")
        frame = build_frame(scene)

        assert hypersurface_willmore(scene, frame) == pytest.approx(willmore_explicit(scene, frame).total[0], abs=1e-9)

    def test_sphere_classical(self):
        """Test that the classical expression vanishes on the sphere."""
        assert classical_willmore(bundled("sphere")) == pytest.approx(0.0, abs=1e-9)

    def test_classical_needs_flat_metric(self):
        """Test that a curved bulk is refused."""
        scene = Scene.from_sources(
            [["1 + 0.1*x2", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
            ["u0", "u1", "0.2*u0^2"],
            [0.1, 0.2],
        )
        with pytest.raises(SceneError):
            classical_willmore(scene)

    def test_classical_needs_jet_order(self):
        """Test that jet order 3 is too low."""
        with pytest.raises(JetOrderError):
            classical_willmore(bundled("sphere", 3))

    def test_classical_needs_surface_in_r3(self):
        """Test that a codimension-2 surface is refused."""
        with pytest.raises(DimensionError):
            classical_willmore(bundled("torus_r4"))


class TestHolographicCrossCheck:
    """Test suite comparing the explicit trace with the holographic extraction."""

    @pytest.mark.parametrize("name", ["ellipsoid", "torus_r4"])
    def test_matches_explicit(self, expected, name):
        """Test that the order-3 obstruction reproduces the explicit trace."""
        scene = bundled(name)
        frame = build_frame(scene)
        explicit = np.asarray(willmore_explicit(scene, frame).total)

        _, holographic = extract_willmore_holographic(scene, frame)

        assert_allclose(holographic, explicit, atol=expected[name]["willmore"]["holographic_tolerance"])

    def test_torus_closed_form(self):
        """Test -(1/3) H_γ II̊_abγ II̊^ab_α = (-1/16, 1/32) on the flat torus of radii 1 and 2."""
        scene = bundled("torus_r4")
        frame = build_frame(scene)

        _, holographic = extract_willmore_holographic(scene, frame)

        assert_allclose(willmore_explicit(scene, frame).total, [-1.0 / 16.0, 1.0 / 32.0], atol=1e-8)
        assert_allclose(holographic, [-1.0 / 16.0, 1.0 / 32.0], atol=1e-5)

    def test_unit_cylinder(self):
        """Test that the unit cylinder in R³ gives -(1/6) H II̊·II̊ = -1/24 on every route."""
        scene = Scene.from_sources(
            [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
            ["cos(u0)", "sin(u0)", "u1"],
            [0.3, 0.2],
            frame_seeds=[["cos(u0)", "sin(u0)", "0"]],
            name="cylinder",
        )
        frame = build_frame(scene)

        _, holographic = extract_willmore_holographic(scene, frame)

        assert willmore_explicit(scene, frame).total[0] == pytest.approx(-1.0 / 24.0, abs=1e-8)
        assert holographic[0] == pytest.approx(-1.0 / 24.0, abs=1e-5)


class TestCovariance:
    """Test suite for conformal covariance."""

    def test_weight_minus_three(self, expected):
        """Test that the trace rescales as Ω^-3 under g -> Ω²g."""
        scene = bundled("curved_d4")
        omega = float(scene.omega_at(JetSeries.variables(scene.point, 0)).value)

        report = willmore_explicit(scene)
        rescaled = willmore_explicit(scene.rescaled())

        residual = conformal_covariance_check(report, rescaled, omega)
        assert residual < expected["curved_d4"]["willmore"]["covariance_tolerance"]

    def test_nonpositive_factor(self):
        """Test that Ω <= 0 raises SceneError."""
        report = willmore_explicit(bundled("sphere"))

        with pytest.raises(SceneError):
            conformal_covariance_check(report, report, 0.0)


class TestDimensions:
    """Test suite for dimension guards."""

    def test_surface_terms_need_surface(self):
        """Test that curves are refused."""
        with pytest.raises(DimensionError):
            surface_terms(bundled("rotating_line"))

    def test_iv_needs_dimension_other_than_three(self):
        """Test that IV is refused for a 3-dimensional Λ."""
        scene = Scene.from_sources(
            [["1", "0", "0", "0"], ["0", "1", "0", "0"], ["0", "0", "1", "0"], ["0", "0", "0", "1"]],
            ["u0", "u1", "u2", "0.1*u0*u1"],
            [0.0, 0.0, 0.0],
        )
        with pytest.raises(DimensionError):
            iv_invariant(scene)

    def test_iv_vanishes_in_flat_bulk(self):
        """Test that IV vanishes on a surface in a flat bulk."""
        assert_allclose(iv_invariant(bundled("torus_r4")).value, 0.0, atol=1e-10)
