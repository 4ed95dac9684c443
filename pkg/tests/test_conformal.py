"""
Tests for conformal defining densities.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from exhol import jets
from exhol.conformal import (
    antisymmetric_trace,
    beta_divergence,
    build_conformal,
    conformal_correct_order1,
    conformal_correct_order2,
    conformal_correct_to_order,
    construct_conformal,
    equivalence_class_basis,
    normal_extension_shift,
    extension_choice_residual,
    extract_willmore_holographic,
    first_order_trace_system,
    p2_principal_symbol_residual,
    p2_relation_residual,
    p2_tangentiality_residual,
    representative_probe,
    rescaling_residual,
    scale_independence_residual,
    scale_tractor_residual,
    third_order_cancel_rows,
    willmore_combination,
    willmore_trace,
    window_cancel_projector,
)
from exhol.defining_map import measure_update_matrix
from exhol.exceptions import DimensionError, ExholError
from exhol.jets import JetSeries
from exhol.submanifold import Scene, apply_gauge, build_frame, extrinsic_data, rotation_gauge
from exhol.utils.serialization import load_bundled_scene, load_expected

CURVED_D5 = [
    ["1 + 0.1*x3^2", "0.05*x0*x1", "0", "0", "0"],
    ["0.05*x0*x1", "1", "0", "0.1*x4", "0"],
    ["0", "0", "exp(0.1*x0)", "0", "0"],
    ["0", "0.1*x4", "0", "1", "0"],
    ["0", "0", "0", "0", "1 + 0.2*x2"],
]

CURVED_D4 = [
    ["1 + 0.1*x2^2", "0.05*x0*x1", "0", "0"],
    ["0.05*x0*x1", "1", "0.1*x3", "0"],
    ["0", "0.1*x3", "1 + 0.2*x0", "0"],
    ["0", "0", "0", "exp(0.1*x1)"],
]


def bundled(name, jet_order=None):
    return load_bundled_scene(name).to_scene(jet_order)


@pytest.fixture(scope="module")
def curved_d4_order1():
    """Order-1 density of the curved codimension-2 surface in a 4-manifold."""
    return conformal_correct_order1(build_conformal(bundled("curved_d4")))


@pytest.fixture(scope="module")
def curved_d4_order2(curved_d4_order1):
    """The same density corrected to order 2."""
    return conformal_correct_order2(curved_d4_order1)


@pytest.fixture(scope="module")
def threefold_in_d5():
    """A 3-dimensional submanifold of a curved 5-manifold (k = 2, away from k = d - 2)."""
    return Scene.from_sources(
        CURVED_D5,
        ["u0", "u1", "u2", "0.3*u0^2 + 0.1*u1*u2", "0.2*u0*u1"],
        [0.1, 0.2, -0.1],
        frame_seeds=[["0", "0", "0", "1", "0"], ["0", "0", "0", "0", "1"]],
        jet_order=5,
        name="threefold_d5",
    )


@pytest.fixture(scope="module")
def threefold_order2(threefold_in_d5):
    """Density of the threefold corrected to order 2."""
    return construct_conformal(threefold_in_d5, 2)


class TestFirstOrder:
    """Test suite for the order-1 conformal correction."""

    def test_first_order_residual(self, curved_d4_order1):
        """Test that the order-1 obstruction is removed."""
        assert curved_d4_order1.checks["first-order residual"] < 1e-9
        assert curved_d4_order1.corrected_to == 1

    def test_trace_system_determinant(self, curved_d4_order1):
        """Test that the trace system has determinant 8(d - k)/d = 4 at d = 4, k = 2."""
        assert curved_d4_order1.checks["trace system determinant"] < 1e-6

    def test_trace_system_matrix(self):
        """Test the 2x2 trace system read off a freshly probed update map."""
        state = build_conformal(bundled("torus_r4"))
        block = first_order_trace_system(measure_update_matrix(state, 1), 2)

        assert block.shape == (2, 2)
        assert np.linalg.det(block) == pytest.approx(4.0, abs=1e-6)

    def test_flat_plane_has_no_obstructions(self):
        """Test that a flat plane stays unobstructed through order 3."""
        state = construct_conformal(bundled("flat_plane"), 3)

        for m in (1, 2, 3):
            assert state.obstructions[m].max_abs() < 1e-9

    def test_scale_tractors_on_surface(self, curved_d4_order1):
        """Test that N_α restricts to (0, n_α, -H_α)."""
        assert scale_tractor_residual(curved_d4_order1) < 1e-8

    @pytest.mark.parametrize("name", ["torus_r4", "ellipsoid"])
    def test_scale_tractors_on_bundled_surfaces(self, name):
        """Test N_α ≐ (0, n_α, -H_α) for a flat torus and an ellipsoid below the top u-degree."""
        state = conformal_correct_order1(build_conformal(bundled(name)))

        assert scale_tractor_residual(state) < 1e-8

    def test_scale_tractors_need_order1(self):
        """Test that the scale-tractor check refuses an uncorrected density."""
        with pytest.raises(ExholError):
            scale_tractor_residual(build_conformal(bundled("circle")))

    def test_rescaling_invariance(self, curved_d4_order1):
        """Test that the conformal Gram matrix is unchanged by (g, s) -> (Ω²g, Ωs)."""
        x = JetSeries.variables(curved_d4_order1.scene.point, curved_d4_order1.order)
        omega = jets.exp(x[0] * 0.3 - x[2] * 0.1)

        assert rescaling_residual(curved_d4_order1, omega) < 1e-8


class TestSecondOrderAtCriticalCodimension:
    """Test suite for order 2 when k = d - 2."""

    def test_antisymmetric_trace_matches_beta_divergence(self, curved_d4_order2):
        """Test that F_γαβγ - F_γβαγ equals ∇̄^a β_aαβ."""
        assert curved_d4_order2.is_k_d_minus_2
        assert curved_d4_order2.checks["antisymmetric trace residual"] < 1e-6

    def test_equivalence_directions_stored(self, curved_d4_order2):
        """Test that the undetermined order-2 directions are recorded."""
        assert len(curved_d4_order2.equivalence_directions) == 1

    def test_rotated_frame_beta_divergence(self):
        """Test that a frame rotation by θ gives ∇̄^a β_a01 = Δ̄θ on the flat torus."""
        scene = bundled("torus_r4")
        frame = build_frame(scene)
        u = JetSeries.variables(scene.parameters, frame.order + 1)
        theta = u[0] * u[0] * 0.3 + u[0] * u[1] * 0.2
        rotated = apply_gauge(frame, rotation_gauge(theta))

        divergence = beta_divergence(extrinsic_data(rotated))
        assert divergence[0, 1] == pytest.approx(0.6, abs=1e-8)
        assert divergence[1, 0] == pytest.approx(-0.6, abs=1e-8)

        state = construct_conformal(scene, 2, frame=rotated)
        assert state.checks["antisymmetric trace residual"] < 1e-6
        assert_allclose(antisymmetric_trace(state.obstructions[2].value), divergence, atol=1e-6)

    def test_torus_window_entry(self):
        """Test F_1212 = 5/64 and F_ααββ = -½ II̊_abα II̊^ab_α = -5/16 on the flat torus of radii 1 and 2."""
        F2 = construct_conformal(bundled("torus_r4"), 2).obstructions[2].value

        assert F2[0, 1, 0, 1] == pytest.approx(5.0 / 64.0, abs=1e-7)
        assert np.einsum("aabb->", F2) == pytest.approx(-5.0 / 16.0, abs=1e-7)

    def test_rotation_invariant_torus_has_no_antisymmetric_trace(self):
        """Test that the torus in its adapted frame has F_γαβγ - F_γβαγ = 0."""
        state = construct_conformal(bundled("torus_r4"), 2)

        assert_allclose(antisymmetric_trace(state.obstructions[2].value), 0.0, atol=1e-8)


class TestSecondOrderFormulas:
    """Test suite for the closed forms of F⁽²⁾ away from k = d - 2."""

    def test_not_critical(self, threefold_order2):
        """Test that the scene sits away from k = d - 2."""
        assert not threefold_order2.is_k_d_minus_2
        assert threefold_order2.equivalence_directions == []

    @pytest.mark.parametrize(
        "name",
        ["window residual", "double trace formula", "trace-free trace formula", "trace-free window formula"],
    )
    def test_formula_checks(self, threefold_order2, name):
        """Test each closed-form check of F⁽²⁾."""
        assert threefold_order2.checks[name] < 1e-6

    def test_window_cancel_projector_is_idempotent(self):
        """Test that I - P_window is a projector."""
        P = window_cancel_projector(2)

        assert_allclose(P @ P, P, atol=1e-12)


class TestThirdOrder:
    """Test suite for order 3 and the Willmore combination."""

    def test_cancel_rows(self):
        """Test the number of cancelled traces on and off k = d - 2."""
        assert third_order_cancel_rows(2, 4).shape == (2, 32)
        assert third_order_cancel_rows(2, 5).shape == (4, 32)

    def test_willmore_combination_single_normal(self):
        """Test that with k = 1 the combination is half the single component."""
        F3 = np.full((1, 1, 1, 1, 1), 0.7)

        assert_allclose(willmore_combination(F3), [0.35])

    def test_willmore_combination_two_normals(self):
        """Test F_αγγρρ - ½F_γγρρα on a tensor with two nonzero entries."""
        F3 = np.zeros((2,) * 5)
        F3[0, 1, 1, 0, 0] = 1.0
        F3[1, 1, 0, 0, 0] = 1.0

        assert_allclose(willmore_combination(F3), [0.5, 0.0])

    def test_normal_extension_shift(self):
        """Test that a window F⁽²⁾ = w(δδ + δδ - 2δδ) moves the combination by (8w/3) H."""
        delta = np.eye(2)
        w = 5.0 / 64.0
        F2 = w * (
            np.einsum("ac,bd->abcd", delta, delta)
            + np.einsum("ad,bc->abcd", delta, delta)
            - 2.0 * np.einsum("ab,cd->abcd", delta, delta)
        )
        H = np.array([0.5, 0.25])

        shift = normal_extension_shift(F2, H)

        assert_allclose(shift, np.einsum("abcde->abdce", shift), atol=1e-15)
        assert_allclose(willmore_combination(shift), 8.0 * w / 3.0 * H, atol=1e-12)

    def test_torus_fiber_and_normal_readings(self):
        """Test the flat torus: (-1/6, -1/48) read along fibers and (-1/16, 1/32) after the shift."""
        state = construct_conformal(bundled("torus_r4"), 3)

        assert_allclose(willmore_combination(state.obstructions[3].value), [-1.0 / 6.0, -1.0 / 48.0], atol=1e-5)
        assert_allclose(willmore_trace(state), [-1.0 / 16.0, 1.0 / 32.0], atol=1e-5)

    def test_willmore_trace_needs_order3(self, curved_d4_order2):
        """Test that the Willmore trace refuses a density corrected only to order 2."""
        with pytest.raises(ExholError):
            willmore_trace(curved_d4_order2)

    def test_cancelled_traces(self, curved_d4_order2):
        """Test that the order-3 step cancels the maximal trace."""
        state = conformal_correct_to_order(curved_d4_order2, 3)

        assert state.third_order_choice_applied
        assert state.checks["cancelled trace residual"] < 1e-7

    def test_sphere_willmore_vanishes(self):
        """Test that the round sphere has zero holographic Willmore invariant."""
        expected = load_expected()["sphere"]["willmore"]
        _, value = extract_willmore_holographic(bundled("sphere"))

        assert_allclose(value, expected["total"], atol=expected["tolerance"])

    def test_holographic_needs_surface(self):
        """Test that the extraction refuses dim Λ ≠ 2."""
        with pytest.raises(DimensionError):
            extract_willmore_holographic(bundled("rotating_line"))

    def test_order_four_not_implemented(self, curved_d4_order2):
        """Test that corrections beyond order 3 are refused."""
        with pytest.raises(ExholError):
            conformal_correct_to_order(curved_d4_order2, 4)


class TestEquivalenceClass:
    """Test suite for the representative independence of the Willmore combination."""

    @pytest.mark.parametrize("k, count", [(1, 0), (2, 1), (3, 3)])
    def test_basis_size(self, k, count):
        """Test that there is one direction per antisymmetric pair."""
        assert len(equivalence_class_basis(k)) == count

    def test_representative_probe(self, curved_d4_order2):
        """Test that moving within the class leaves the Willmore combination fixed."""
        assert representative_probe(curved_d4_order2) < 1e-7

    def test_probe_needs_order2(self, curved_d4_order1):
        """Test that the probe refuses a state not corrected to order 2."""
        with pytest.raises(ExholError):
            representative_probe(curved_d4_order1)

    def test_extension_choice(self):
        """Test that off-Λ changes of the order-2 correction leave F⁽³⁾ on Λ unchanged."""
        scene = Scene.from_sources(
            CURVED_D4,
            ["u0", "u1", "u2", "0.2*u0^2 + 0.1*u1*u2"],
            [0.1, 0.2, -0.1],
            frame_seeds=[["0", "0", "0", "1"]],
            jet_order=6,
            name="hypersurface_d4",
        )
        state = construct_conformal(scene, 1)

        assert extension_choice_residual(state) < 1e-7

    def test_extension_choice_needs_order1(self, curved_d4_order2):
        """Test that the extension-choice probe starts at order 1."""
        with pytest.raises(ExholError):
            extension_choice_residual(curved_d4_order2)


class TestP2:
    """Test suite for the Laplace-Robin operator P₂."""

    @pytest.fixture
    def function(self, curved_d4_order1):
        """A weight-0 test function around the scene point."""
        x = JetSeries.variables(curved_d4_order1.scene.point, curved_d4_order1.order)
        return x[0] * x[1] + x[2] * 0.5 - x[3] * x[3] * 0.2

    def test_principal_symbol(self, curved_d4_order1):
        """Test that P₂ acts as -kΔ^⊤ on a tangential quadratic."""
        assert p2_principal_symbol_residual(curved_d4_order1) < 1e-6

    def test_tangentiality(self, curved_d4_order1, function):
        """Test that P₂ and P₂^⊤ ignore O(σ) changes of their argument."""
        assert p2_tangentiality_residual(curved_d4_order1, function) < 1e-7

    def test_relation(self, curved_d4_order1, function):
        """Test the relation between P₂, P₂^⊤ and the order-2 obstruction."""
        assert p2_relation_residual(curved_d4_order1, function) < 1e-7

    def test_needs_order1(self, function):
        """Test that P₂ is refused before the order-1 correction."""
        state = build_conformal(bundled("curved_d4"))

        with pytest.raises(ExholError):
            p2_principal_symbol_residual(state)


class TestScaleIndependence:
    """Test suite for constructing the density in two metrics of the class."""

    def test_curved_surface(self):
        """Test that F⁽²⁾ and the Willmore combination rescale with weights -2 and -3."""
        residuals = scale_independence_residual(bundled("curved_d4"))

        assert set(residuals) == {"order-2 obstruction", "willmore combination"}
        for value in residuals.values():
            assert value < 1e-6

    def test_order2_only(self):
        """Test that max_order = 2 reports only the order-2 obstruction."""
        residuals = scale_independence_residual(bundled("curved_d4"), max_order=2)

        assert list(residuals) == ["order-2 obstruction"]
