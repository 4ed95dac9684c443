"""
Tests for scenes, normal frames and extrinsic data along Λ.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from exhol import jets
from exhol.exceptions import DimensionError, SceneError
from exhol.jets import JetSeries
from exhol.submanifold import (
    Scene,
    apply_gauge,
    build_frame,
    classical_identity_residuals,
    coulomb_gauge,
    extrinsic_data,
    frame_components,
    frenet_frame,
    frenet_torsion,
    gauge_transformed_beta,
    normal_curvature_commutator_residual,
    rotation_gauge,
    rotation_minimizing_frame,
)
from exhol.utils.serialization import load_bundled_scene

FLAT3 = [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]]


def bundled(name, jet_order=None):
    return load_bundled_scene(name).to_scene(jet_order)


class TestScene:
    """Test suite for scene parsing and validation."""

    def test_from_sources(self):
        """Test that expression text is parsed in the x and u scopes."""
        scene = Scene.from_sources(FLAT3, ["u0", "u1", "0"], [0.1, 0.2], name="plane")

        assert scene.dimension == 3
        assert scene.codimension == 1
        assert scene.tangent_dimension == 2
        assert_allclose(scene.point, [0.1, 0.2, 0.0])

    def test_base_point_length(self):
        """Test that the base point must have d - k entries."""
        with pytest.raises(SceneError):
            Scene.from_sources(FLAT3, ["u0", "u1", "0"], [0.1])

    @pytest.mark.parametrize("base_point", [[], [0.1, 0.2, 0.3]])
    def test_base_point_count_out_of_range(self, base_point):
        """Test that a base point with no parameters or d parameters raises SceneError."""
        with pytest.raises(SceneError):
            Scene.from_sources(FLAT3, ["u0", "u1", "0"], base_point)

    def test_seed_parameter_outside_base_point(self):
        """Test that a seed using a parameter beyond the base point raises SceneError."""
        with pytest.raises(SceneError):
            Scene.from_sources(FLAT3, ["u0", "0", "0"], [0.0], frame_seeds=[["0", "u1", "1"], ["0", "1", "0"]])

    def test_dimension_two_rejected(self):
        """Test that a planar bulk raises DimensionError."""
        with pytest.raises(DimensionError):
            Scene.from_sources([["1", "0"], ["0", "1"]], ["u0", "0"], [0.0])

    def test_seed_shape(self):
        """Test that frame seeds must be k x d."""
        with pytest.raises(SceneError):
            Scene.from_sources(FLAT3, ["u0", "0", "0"], [0.0], frame_seeds=[["0", "1", "0"]])

    def test_rescaled_metric(self):
        """Test that rescaling multiplies the metric by Ω² at the point."""
        scene = bundled("curved_d4")
        rescaled = scene.rescaled()
        x = JetSeries.variables(scene.point, 0)

        factor = math.exp(0.3 * scene.point[0]) ** 2
        assert_allclose(rescaled.metric_at(x).value, factor * scene.metric_at(x).value)
        assert rescaled.conformal_factor is None

    def test_rescaled_without_factor(self):
        """Test that a scene without a conformal factor rescales to itself."""
        scene = bundled("flat_plane")

        assert scene.rescaled() is scene


class TestFrame:
    """Test suite for Gram-Schmidt normal frames."""

    def test_orthonormal_seeded_frame(self):
        """Test that seeded frames are orthonormal and tangent-orthogonal."""
        frame = build_frame(bundled("curved_d4"))

        assert frame.orthonormality_residual() < 1e-10
        assert frame.order == 5

    def test_unseeded_frame(self):
        """Test that coordinate axes are used when seeds are absent."""
        scene = Scene.from_sources(FLAT3, ["u0", "u0^2", "0"], [0.3])
        frame = build_frame(scene)

        assert frame.normals.shape == (2, 3)
        assert frame.orthonormality_residual() < 1e-10

    def test_rank_deficient_embedding(self):
        """Test that a singular embedding differential raises SceneError."""
        scene = Scene.from_sources(FLAT3, ["u0^2", "0", "0"], [0.0])

        with pytest.raises(SceneError):
            build_frame(scene)

    def test_dependent_seed(self):
        """Test that a seed along the tangent raises SceneError."""
        scene = Scene.from_sources(
            FLAT3, ["u0", "0", "0"], [0.0], frame_seeds=[["1", "0", "0"], ["0", "1", "0"]]
        )

        with pytest.raises(SceneError):
            build_frame(scene)

    def test_projector(self):
        """Test that the tangential projector kills the normals."""
        frame = build_frame(bundled("torus_r4"))
        killed = jets.jet_einsum("ab,zb->za", frame.projector, frame.normals)

        assert killed.max_abs() < 1e-10

    def test_frame_components_of_metric(self):
        """Test that the metric in the adapted basis is block diagonal."""
        frame = build_frame(bundled("curved_d4"))
        components = frame_components(frame.scene.metric_jet().metric, frame)

        value = components.value
        assert_allclose(value[2:, 2:], np.eye(2), atol=1e-10)
        assert_allclose(value[:2, 2:], 0.0, atol=1e-10)
        assert_allclose(value[:2, :2], frame.induced_metric.value, atol=1e-10)


class TestExtrinsicData:
    """Test suite for II, H, II̊, β and ℛ."""

    def test_flat_plane(self):
        """Test that a flat plane has no extrinsic curvature."""
        data = extrinsic_data(build_frame(bundled("flat_plane")))

        assert data.second_fundamental_form.max_abs() < 1e-12
        assert data.normal_fundamental_form.max_abs() < 1e-12

    def test_circle(self):
        """Test that the unit circle has unit mean curvature along the radial normal."""
        data = extrinsic_data(build_frame(bundled("circle")))

        assert_allclose(data.mean_curvature.value, [1.0, 0.0], atol=1e-12)
        assert data.trace_free.max_abs() < 1e-12

    def test_sphere_is_umbilic(self):
        """Test that the round sphere is totally umbilic with H = 1."""
        data = extrinsic_data(build_frame(bundled("sphere")))

        assert data.trace_free.max_abs() < 1e-10
        assert float(data.mean_curvature.value[0]) == pytest.approx(1.0)

    def test_rotating_line_beta(self):
        """Test that the rotating frame has β_u,12 = -1."""
        data = extrinsic_data(build_frame(bundled("rotating_line")))

        assert float(data.normal_fundamental_form.value[0, 0, 1]) == pytest.approx(-1.0)
        assert float(data.normal_fundamental_form.value[0, 1, 0]) == pytest.approx(1.0)

    def test_invariant_residuals(self):
        """Test the symmetry and trace checks on a curved scene."""
        data = extrinsic_data(build_frame(bundled("curved_d4")))
        residuals = data.invariant_residuals()

        assert set(residuals) == {"II symmetry", "II̊ trace", "β antisymmetry"}
        assert max(residuals.values()) < 1e-10

    def test_commutator(self):
        """Test that [D_i, D_j] acts by the normal curvature."""
        data = extrinsic_data(build_frame(bundled("curved_d4")))

        assert normal_curvature_commutator_residual(data) < 1e-9

    def test_classical_identities(self):
        """Test Gauss, Codazzi, Ricci and the Fialkow family on a curved scene."""
        report = classical_identity_residuals(build_frame(bundled("curved_d4")))

        assert "Gauss equation" in report.residuals
        assert "trace-free Codazzi equation" in report.residuals
        assert report.passed(1e-7)
        assert any("theorema egregium" in note for note in report.notes)

    def test_curve_skips_fialkow(self):
        """Test that curves note the skipped Fialkow-Gauss family."""
        report = classical_identity_residuals(build_frame(bundled("helix")))

        assert "Ricci equation" in report.residuals
        assert report.notes == ["Fialkow-Gauss family skipped: dim Λ = 1"]
        assert report.passed(1e-7)


class TestGauge:
    """Test suite for normal-frame gauge changes."""

    @pytest.fixture
    def frame(self):
        """Frame along the helix."""
        return build_frame(bundled("helix"))

    def test_rotation_gauge_transforms_beta(self, frame):
        """Test that β transforms inhomogeneously under a rotation gauge."""
        u = JetSeries.variables(frame.scene.parameters, frame.order + 1)[0]
        gauge = rotation_gauge(0.3 * u + 0.1 * u * u)
        beta = extrinsic_data(frame).normal_fundamental_form

        rotated = extrinsic_data(apply_gauge(frame, gauge)).normal_fundamental_form
        expected = gauge_transformed_beta(beta, gauge.truncate(beta.order + 1))
        order = min(rotated.order, expected.order)
        assert_allclose(rotated.truncate(order).coeffs, expected.truncate(order).coeffs, atol=1e-10)

    def test_non_orthogonal_gauge(self, frame):
        """Test that a non-orthogonal gauge raises SceneError."""
        u = JetSeries.variables(frame.scene.parameters, 2)[0]
        scaling = u * 0.0 + 2.0 * np.eye(2)

        with pytest.raises(SceneError):
            apply_gauge(frame, scaling)

    def test_rotation_minimizing_frame(self, frame):
        """Test that the rotation minimizing frame has vanishing β."""
        rmf = rotation_minimizing_frame(frame)
        beta = extrinsic_data(rmf).normal_fundamental_form

        assert beta.max_abs() < 1e-9
        assert rmf.orthonormality_residual() < 1e-9

    def test_coulomb_gauge(self, frame):
        """Test that the Coulomb gauge makes β_u / |ι'| constant."""
        gauged = apply_gauge(frame, coulomb_gauge(frame))
        beta_u = extrinsic_data(gauged).normal_fundamental_form[0]
        unit_speed = beta_u / jets.sqrt(gauged.induced_metric[0, 0])

        assert (unit_speed - unit_speed.value).max_abs() < 1e-9

    def test_frenet_torsion(self):
        """Test that the helix (cos u, sin u, u/2) has torsion 0.4."""
        frame = frenet_frame(bundled("helix"))

        assert frenet_torsion(extrinsic_data(frame)) == pytest.approx(0.4)

    def test_frenet_needs_curve_in_r3(self):
        """Test that Frenet frames of surfaces raise DimensionError."""
        with pytest.raises(DimensionError):
            frenet_frame(bundled("sphere"))
