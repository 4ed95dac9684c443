"""
Tests for labelled tensors, Young projectors and least-squares removal.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from exhol.exceptions import IndexKindError
from exhol.jets import JetSeries
from exhol.tensors import (
    IndexSlot,
    Tensor,
    antisymmetrize,
    coefficients_from_symmetric_tensor,
    contract,
    lower_index,
    pistol_dimension,
    project_pistol31,
    project_symmetric,
    project_window22,
    projector_matrix,
    raise_index,
    remove_correctable,
    symmetric_dimension,
    symmetric_tensor_from_coefficients,
    symmetrize,
    trace_free,
    window_dimension,
)


class TestTensor:
    """Test suite for index bookkeeping."""

    def test_of_parses_spec(self):
        """Test that the compact spec builds the right slots."""
        t = Tensor.of(np.zeros((3, 2)), "bd,nu", weight=-1.0, name="probe")

        assert t.slots == (IndexSlot("bulk", "down"), IndexSlot("normal", "up"))
        assert t.rank == 2
        assert t.weight == -1.0

    def test_slot_count_must_match_rank(self):
        """Test that a slot list of the wrong length is rejected."""
        with pytest.raises(IndexKindError):
            Tensor.of(np.zeros((3, 3)), "bd")

    def test_unknown_kind(self):
        """Test that unknown index kinds are rejected."""
        with pytest.raises(IndexKindError):
            IndexSlot("spinor")

    def test_contract_bulk_pair(self):
        """Test that an up/down bulk pair traces."""
        t = Tensor.of(np.diag([1.0, 2.0, 3.0]), "bu,bd")

        assert float(contract(t, 0, 1).data) == pytest.approx(6.0)

    def test_contract_needs_opposite_variance(self):
        """Test that two lower bulk indices cannot be contracted."""
        t = Tensor.of(np.eye(3), "bd,bd")

        with pytest.raises(IndexKindError):
            contract(t, 0, 1)

    def test_contract_normal_by_summation(self):
        """Test that normal-frame indices contract by plain summation."""
        t = Tensor.of(np.eye(2), "nd,nd")

        assert float(contract(t, 0, 1).data) == pytest.approx(2.0)

    def test_contract_mixed_kinds(self):
        """Test that bulk and normal indices cannot be contracted."""
        t = Tensor.of(np.eye(2), "bu,nd")

        with pytest.raises(IndexKindError):
            contract(t, 0, 1)

    def test_lower_and_raise(self):
        """Test that lowering then raising with inverse metrics is the identity."""
        g = np.array([[2.0, 0.5], [0.5, 1.0]])
        v = Tensor.of(np.array([1.0, -1.0]), "bu")

        lowered = lower_index(v, 0, g)
        assert_allclose(lowered.data, g @ v.data)
        assert lowered.slots[0].variance == "down"
        assert_allclose(raise_index(lowered, 0, np.linalg.inv(g)).data, v.data)

    def test_normal_indices_never_move(self):
        """Test that raising a normal index raises IndexKindError."""
        t = Tensor.of(np.ones(2), "nd")

        with pytest.raises(IndexKindError):
            raise_index(t, 0, np.eye(2))

    def test_values_of_jet_tensor(self):
        """Test that values() reads the constant term of jet data."""
        x = JetSeries.variables([1.0, 2.0], 2)
        t = Tensor.of(x, "bd")

        assert_allclose(t.values(), [1.0, 2.0])


class TestSymmetries:
    """Test suite for symmetrization and trace removal."""

    @pytest.fixture
    def random_rank3(self):
        """A random rank-3 array."""
        return np.random.default_rng(3).normal(size=(3, 3, 3))

    def test_symmetrize_is_idempotent(self, random_rank3):
        """Test that symmetrizing twice changes nothing."""
        once = symmetrize(random_rank3, [0, 1, 2])

        assert_allclose(symmetrize(once, [0, 1, 2]), once)
        assert_allclose(once, once.transpose(1, 0, 2))

    def test_antisymmetrize_kills_symmetric(self, random_rank3):
        """Test that antisymmetrization annihilates symmetric pairs."""
        sym = symmetrize(random_rank3, [0, 1])

        assert_allclose(antisymmetrize(sym, [0, 1]), 0.0, atol=1e-14)

    def test_symmetrize_rejects_mixed_kinds(self):
        """Test that symmetrizing across index kinds raises IndexKindError."""
        t = Tensor.of(np.zeros((2, 2)), "bd,nd")

        with pytest.raises(IndexKindError):
            symmetrize(t, [0, 1])

    def test_symmetrize_jets(self):
        """Test that symmetrization acts on jet-valued data."""
        x = JetSeries.variables([0.1, 0.2], 2)
        outer = JetSeries(np.einsum("im,j->ijm", x.coeffs, [1.0, 0.0]), x.space, x.base)
        sym = symmetrize(outer, [0, 1])

        assert_allclose(sym.coeffs, sym.transpose(1, 0).coeffs)

    def test_trace_free(self):
        """Test that trace_free removes every pairwise trace."""
        t = np.random.default_rng(5).normal(size=(3, 3, 3))
        tf = trace_free(symmetrize(t, [0, 1, 2]))

        assert_allclose(np.einsum("iij->j", tf), 0.0, atol=1e-12)
        assert_allclose(trace_free(np.eye(4)), 0.0, atol=1e-12)

    def test_symmetric_coefficients(self):
        """Test the conversion between monomial coefficients and symmetric tensors."""
        coeffs = np.array([1.0, 2.0, 3.0])
        tensor = symmetric_tensor_from_coefficients(coeffs, 2, 2)

        s = np.array([0.4, -0.7])
        polynomial = coeffs[0] * s[0] ** 2 + coeffs[1] * s[0] * s[1] + coeffs[2] * s[1] ** 2
        assert np.einsum("ij,i,j->", tensor, s, s) == pytest.approx(polynomial)
        assert_allclose(coefficients_from_symmetric_tensor(tensor, 2, 2), coeffs)


class TestYoungProjectors:
    """Test suite for the rank-4 projectors on normal indices."""

    @pytest.mark.parametrize("k", [2, 3])
    def test_window_projector(self, k):
        """Test that the window projector is idempotent with the expected rank."""
        P = projector_matrix(project_window22, k)

        assert_allclose(P @ P, P, atol=1e-12)
        assert np.linalg.matrix_rank(P) == window_dimension(k)

    @pytest.mark.parametrize("k", [2, 3])
    def test_pistol_projector(self, k):
        """Test that the pistol projector is idempotent with the expected rank."""
        P = projector_matrix(project_pistol31, k)

        assert_allclose(P @ P, P, atol=1e-12)
        assert np.linalg.matrix_rank(P) == pistol_dimension(k)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_symmetric_rank(self, k):
        """Test that full symmetrization has rank C(k+3, 4)."""
        P = projector_matrix(project_symmetric, k)

        assert np.linalg.matrix_rank(P) == symmetric_dimension(k)

    def test_projectors_kill_symmetric(self):
        """Test that both mixed projectors annihilate symmetric tensors."""
        F = project_symmetric(np.random.default_rng(0).normal(size=(3, 3, 3, 3)))

        assert_allclose(project_window22(F), 0.0, atol=1e-13)
        assert_allclose(project_pistol31(F), 0.0, atol=1e-13)

    def test_window_output_symmetries(self):
        """Test that window tensors are symmetric in each index pair."""
        W = project_window22(np.random.default_rng(1).normal(size=(2, 2, 2, 2)))

        assert_allclose(W, W.transpose(1, 0, 2, 3), atol=1e-13)
        assert_allclose(W, W.transpose(0, 1, 3, 2), atol=1e-13)

    def test_dimensions_at_k2(self):
        """Test the dimension counts for a codimension-two submanifold."""
        assert window_dimension(2) == 1
        assert pistol_dimension(2) == 3
        assert symmetric_dimension(2) == 5

    def test_rank_check(self):
        """Test that projectors need rank-4 input."""
        with pytest.raises(IndexKindError):
            project_window22(np.zeros((2, 2, 2)))

    def test_projector_rejects_bulk_slots(self):
        """Test that Young projectors refuse bulk indices."""
        t = Tensor.of(np.zeros((2, 2, 2, 2)), "bd,bd,bd,bd")

        with pytest.raises(IndexKindError):
            project_pistol31(t)


class TestRemoveCorrectable:
    """Test suite for the least-squares removal step."""

    def test_full_removal(self):
        """Test that reachable components are cancelled."""
        result = remove_correctable(np.array([1.0, 2.0]), np.array([[1.0], [0.0]]))

        assert_allclose(result.solution, [-1.0])
        assert_allclose(result.residual, [0.0, 2.0])
        assert result.residual_norm == pytest.approx(2.0)
        assert result.rank == 1
        assert not result.rank_deficient

    def test_cancel_projector(self):
        """Test that only the projected components are targeted."""
        M = np.array([[1.0], [1.0]])
        Q = np.diag([0.0, 1.0])
        result = remove_correctable(np.array([3.0, 1.0]), M, cancel_projector=Q)

        assert_allclose(result.residual, [2.0, 0.0])

    def test_null_update_map(self):
        """Test that a vanishing update map returns a zero solution."""
        M = np.full((2, 2), 1e-14)
        result = remove_correctable(np.array([1.0, 1.0]), M)

        assert_allclose(result.solution, 0.0)
        assert result.rank == 0
        assert result.rank_deficient

    def test_rank_deficient_minimum_norm(self):
        """Test that duplicate parameters share the correction."""
        M = np.array([[1.0, 1.0], [0.0, 0.0]])
        result = remove_correctable(np.array([2.0, 0.0]), M)

        assert_allclose(result.solution, [-1.0, -1.0])
        assert result.rank_deficient

    def test_column_stack(self):
        """Test that several right-hand sides are handled at once."""
        F = np.array([[1.0, 2.0], [0.0, 0.0]])
        result = remove_correctable(F, np.array([[1.0], [0.0]]))

        assert result.solution.shape == (1, 2)
        assert_allclose(result.residual, 0.0, atol=1e-14)
