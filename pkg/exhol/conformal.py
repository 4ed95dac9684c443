"""
Conformal defining densities corrected through third order.

The Gram matrix is h(N_α, N_β) with N_α = ĥDσ_α, so it costs two jet orders
instead of one. Corrections reuse the probed update maps of the Riemannian
construction; what changes is which components each order must cancel:

* order 1: everything (the trace system stays solvable for k ≠ d)
* order 2: everything outside the window class; at k = d - 2 the
  antisymmetric trace F_γαβγ - F_γβαγ survives as well
* order 3: the maximal traces F_γγρρα and (for k ≠ d - 2) F_αγγρρ
"""

import logging
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional

import numpy as np

from . import jets
from .curvature import CurvatureStack, MetricJet
from .defining_map import (
    DefiningMapState,
    build_initial,
    correction_monomials,
    corrected_defining,
    extract_obstruction,
    measure_update_matrix,
    remove_order,
    symmetric_to_monomial,
)
from .exceptions import DimensionError, ExholError
from .jets import JetSeries, jet_einsum
from .submanifold import (
    ExtrinsicData,
    FrameField,
    Scene,
    extrinsic_data,
    frame_components,
    intrinsic_covariant_derivative,
)
from .tensors import (
    project_window22,
    projector_matrix,
    symmetric_tensor_from_coefficients,
    symmetrize,
    trace_free,
)
from .tractors import (
    TractorCalculus,
    conformal_gram,
    p2_operator,
    p2_tangential,
    p2_weight,
    scale_tractors,
    submanifold_tractors,
)
from .utils.expressions import Expression

logger = logging.getLogger(__name__)


@dataclass
class ConformalDefiningState(DefiningMapState):
    """Defining density σ_α = [g; s_α] in the scale of the scene metric."""

    calculus: Optional[TractorCalculus] = None
    third_order_choice_applied: bool = False
    equivalence_directions: List[np.ndarray] = field(default_factory=list)

    @property
    def minimum_order_offset(self) -> int:
        return 2

    @property
    def dimension(self) -> int:
        return self.scene.dimension

    @property
    def is_k_d_minus_2(self) -> bool:
        return self.codimension == self.dimension - 2

    def gram(self, defining: Optional[JetSeries] = None) -> JetSeries:
        """G_αβ = ∇s_α·∇s_β - (2/d) s_(α(Δ + J)s_β)."""
        s = self.defining if defining is None else defining
        return conformal_gram(self.calculus, s)


def build_conformal(scene: Scene, frame: Optional[FrameField] = None, order: Optional[int] = None) -> ConformalDefiningState:
    base = build_initial(scene, frame, order)
    values = {f.name: getattr(base, f.name) for f in fields(base)}
    return ConformalDefiningState(**values, calculus=TractorCalculus(base.metric))


# order 1 --------------------------------------------------------------------


def _trace_rows(k: int, rank: int, pattern: str) -> np.ndarray:
    """Rows picking out a single-free-index trace of a flattened rank-``rank`` tensor.

    ``pattern`` uses ``w`` for the free slot and paired letters for traced slots,
    e.g. ``"ggrrw"`` for F_γγρρω.
    """
    rows = np.zeros((k, k ** rank))
    pairs = {c for c in pattern if c != "w"}
    for w in range(k):
        for values in np.ndindex(*(k,) * len(pairs)):
            assignment = dict(zip(sorted(pairs), values))
            index = tuple(w if c == "w" else assignment[c] for c in pattern)
            rows[w, np.ravel_multi_index(index, (k,) * rank)] += 1.0
    return rows


def _coefficient_to_tensor(k: int, m: int) -> np.ndarray:
    """Matrix from monomial coefficients (α-major) to the full A_αβ₁…β_(m+1)."""
    nmon = len(correction_monomials(k, m))
    columns = []
    for alpha in range(k):
        for p in range(nmon):
            coeffs = np.zeros((k, nmon))
            coeffs[alpha, p] = 1.0
            tensor = symmetric_tensor_from_coefficients(coeffs, k, m + 1)
            columns.append(tensor.reshape(-1))
    return np.stack(columns, axis=1)


def first_order_trace_system(update_matrix: np.ndarray, k: int) -> np.ndarray:
    """2×2 map (A_ααω, A_ωαα) ↦ (ΔF_ααω, ΔF_ωαα) at ω = 0, read off the probed update map."""
    to_tensor = _coefficient_to_tensor(k, 1)
    T_A = np.vstack([_trace_rows(k, 3, "aaw") @ to_tensor, _trace_rows(k, 3, "waa") @ to_tensor])
    T_F = np.vstack([_trace_rows(k, 3, "aaw"), _trace_rows(k, 3, "waa")])
    C = T_F @ update_matrix @ np.linalg.pinv(T_A)
    block = [0, k]
    return C[np.ix_(block, block)]


def conformal_correct_order1(state: ConformalDefiningState) -> ConformalDefiningState:
    k, d = state.codimension, state.dimension
    if k == d:
        raise DimensionError("Codimension equal to the dimension leaves nothing to correct")
    M = measure_update_matrix(state, 1)
    new, removal, raw = remove_order(state, 1, update_matrix=M)
    new.checks["first-order residual"] = new.obstructions[1].max_abs()
    if k > 1:
        determinant = float(np.linalg.det(first_order_trace_system(M, k)))
        new.checks["trace system determinant"] = abs(determinant - 8.0 * (d - k) / d)
    logger.info(f"Conformal order 1 corrected; residual {new.checks['first-order residual']:.3e}")
    return new


# order 2 --------------------------------------------------------------------


def window_cancel_projector(k: int) -> np.ndarray:
    """I - P_window on flattened (k,k,k,k) tensors."""
    return np.eye(k ** 4) - projector_matrix(project_window22, k)


def antisymmetric_trace(F2: np.ndarray) -> np.ndarray:
    """F_γαβγ - F_γβαγ, the antisymmetric part of the outer trace without a ½."""
    trace = np.einsum("gabg->ab", F2)
    return trace - trace.T


def beta_divergence(data: ExtrinsicData) -> np.ndarray:
    """∇̄^a β_aαβ at u₀."""
    beta = data.normal_fundamental_form
    d_beta = intrinsic_covariant_derivative(beta, data.frame, lower=(0,))  # [i, α, β, j]
    return jet_einsum("ij,izyj->zy", data.frame.induced_inverse, d_beta).value


def conformal_f2_quantities(
    frame: FrameField,
    data: Optional[ExtrinsicData] = None,
    stack: Optional[CurvatureStack] = None,
) -> Dict[str, np.ndarray]:
    """Closed forms for the window-class F⁽²⁾ at u₀ (k ≠ d - 2)."""
    data = extrinsic_data(frame) if data is None else data
    stack = frame.scene.bulk_curvature(with_cotton=False) if stack is None else stack
    d, k, n = frame.scene.dimension, frame.codimension, frame.tangent_dimension
    v = slice(n, None)
    ginv = frame.induced_inverse.value
    TF = data.trace_free.value
    beta = data.normal_fundamental_form.value
    W = frame_components(stack.weyl, frame).value[v, v, v, v]

    square = np.einsum("ijz,ik,jl,kly->zy", TF, ginv, ginv, TF)
    beta_full = np.einsum("izy,ij,jzy->", beta, ginv, beta)
    denominator = 3 * d - 2 * k - 4
    double_trace = (
        -2.0 * (k - 1) / denominator * np.trace(square)
        + (3 * d - 4 * k - 2) / denominator * beta_full
        - (d - 2) / denominator * np.einsum("zyyz->", W)
    )

    denominator = 3.0 * (3 * d - k - 4)
    rho_beta = np.einsum("iwz,ij,jyw->zy", beta, ginv, beta)  # β_aρα β^a_βρ
    trace = (
        -(k - 2) / denominator * square
        - (3 * d - 2 * k - 2) / denominator * rho_beta
        - (d - 2) / denominator * np.einsum("wzyw->zy", W)
    )
    trace = symmetrize(trace, [0, 1])
    trace = trace - np.eye(k) * np.trace(trace) / k

    shape = np.einsum("iaz,ij,jyb->zyab", beta, ginv, beta)  # β_aγ₁α β^a_γ₂β, layout [α,β,γ₁,γ₂]
    weyl = np.einsum("azyb->zyab", W) / 3.0  # W_γ₁αβγ₂
    window = symmetrize(symmetrize(-shape - weyl, [0, 1]), [2, 3])
    return {
        "double trace": np.asarray(double_trace),
        "trace-free trace": trace,
        "trace-free window": trace_free(project_window22(window)),
    }


def conformal_correct_order2(state: ConformalDefiningState) -> ConformalDefiningState:
    k, d = state.codimension, state.dimension
    new, removal, raw = remove_order(state, 2, cancel_projector=window_cancel_projector(k))
    F2 = new.obstructions[2].value
    data = extrinsic_data(new.frame)
    if k == d - 2:
        if removal.rank_deficient:
            logger.info(f"Order-2 system at k = d - 2 has rank {removal.rank} as expected")
        new.equivalence_directions = equivalence_class_basis(k)
        new.checks["antisymmetric trace residual"] = float(
            np.max(np.abs(antisymmetric_trace(F2) - beta_divergence(data)))
        )
    else:
        new.checks["window residual"] = float(np.max(np.abs(F2 - project_window22(F2))))
        expected = conformal_f2_quantities(new.frame, data)
        trace = symmetrize(np.einsum("rrab->ab", F2), [0, 1])
        trace = trace - np.eye(k) * np.trace(trace) / k
        new.checks["double trace formula"] = float(abs(np.einsum("aabb->", F2) - expected["double trace"]))
        new.checks["trace-free trace formula"] = float(np.max(np.abs(trace - expected["trace-free trace"])))
        new.checks["trace-free window formula"] = float(
            np.max(np.abs(trace_free(F2) - expected["trace-free window"]))
        )
        if removal.rank_deficient:
            logger.warning(f"Order-2 system has rank {removal.rank}")
    logger.info(f"Conformal order 2 corrected; obstruction max {new.obstructions[2].max_abs():.3e}")
    return new


# order 3 --------------------------------------------------------------------


def third_order_cancel_rows(k: int, d: int) -> np.ndarray:
    """Q for order 3: F_γγρρα always, F_αγγρρ as well unless k = d - 2."""
    rows = [_trace_rows(k, 5, "ggrrw")]
    if k != d - 2:
        rows.append(_trace_rows(k, 5, "wggrr"))
    return np.vstack(rows)


def willmore_combination(F3: np.ndarray) -> np.ndarray:
    """F_αγγρρ - ½F_γγρρα, independent of the representative when k = d - 2.

    With a single normal both traces are F_11111 and the combination is half of it.
    """
    return np.einsum("aggrr->a", F3) - 0.5 * np.einsum("ggrra->a", F3)


def normal_extension_shift(F2: np.ndarray, mean_curvature: np.ndarray) -> np.ndarray:
    """Change of F⁽³⁾ when F⁽²⁾ is extended off Λ with N·D F⁽²⁾ ≐ 0 instead of constant along fibers.

    F⁽²⁾ has weight -2, so that extension has ∂_σγ F⁽²⁾ = 2ρ_γ F⁽²⁾ = -2H_γ F⁽²⁾ on Λ and the
    σ³ coefficient gains 2 F⁽²⁾_αβ(γ₁γ₂ H_γ₃).
    """
    return 2.0 * symmetrize(np.einsum("abcd,e->abcde", F2, mean_curvature), [2, 3, 4])


def willmore_trace(state: ConformalDefiningState) -> np.ndarray:
    """Willmore combination of F⁽³⁾ read against the N·D-flat extension of F⁽²⁾; weight -3."""
    if state.corrected_to < 3:
        raise ExholError("The Willmore trace needs a density corrected to order 3")
    H = extrinsic_data(state.frame).mean_curvature.value
    F3 = state.obstructions[3].value + normal_extension_shift(state.obstructions[2].value, H)
    return willmore_combination(F3)


def conformal_correct_order3(state: ConformalDefiningState) -> ConformalDefiningState:
    k, d = state.codimension, state.dimension
    Q = third_order_cancel_rows(k, d)
    new, removal, raw = remove_order(state, 3, cancel_projector=Q)
    F3 = new.obstructions[3].value
    new.checks["cancelled trace residual"] = float(np.max(np.abs(Q @ F3.reshape(-1))))
    new.third_order_choice_applied = True
    logger.info(
        f"Conformal order 3 corrected with rank {removal.rank}; "
        f"unfixed trace F_γρργα max {np.max(np.abs(np.einsum('grrga->a', F3))):.3e}"
    )
    return new


def conformal_correct_to_order(state: ConformalDefiningState, m: int) -> ConformalDefiningState:
    steps = {1: conformal_correct_order1, 2: conformal_correct_order2, 3: conformal_correct_order3}
    if m not in steps:
        raise ExholError(f"Conformal corrections are implemented for orders 1 to 3, not {m}")
    return steps[m](state)


def construct_conformal(
    scene: Scene, max_order: int, frame: Optional[FrameField] = None, order: Optional[int] = None
) -> ConformalDefiningState:
    state = build_conformal(scene, frame, order)
    for m in range(1, max_order + 1):
        state = conformal_correct_to_order(state, m)
    return state


def equivalence_class_basis(k: int) -> List[np.ndarray]:
    """Order-2 corrections A_[αγ] σ_γ σ_ρ σ_ρ, one per pair α < γ, as monomial coefficients.

    At k = d - 2 these are the directions the order-2 system cannot see.
    """
    basis = []
    for alpha in range(k):
        for gamma in range(alpha + 1, k):
            shift = np.zeros((k, k, k, k))
            for rho in range(k):
                shift[alpha, gamma, rho, rho] += 1.0
                shift[gamma, alpha, rho, rho] -= 1.0
            basis.append(symmetric_to_monomial(symmetrize(shift, [1, 2, 3]), k, 3))
    return basis


def representative_probe(state: ConformalDefiningState, seed: int = 0, scale: float = 0.3) -> float:
    """Move σ along a random equivalence-class direction and report the change of the Willmore combination.

    Starts from a state corrected to order 2.
    """
    if state.corrected_to != 2:
        raise ExholError("Representative probe starts from a state corrected to order 2")
    k = state.codimension
    basis = state.equivalence_directions or equivalence_class_basis(k)
    reference = willmore_trace(conformal_correct_order3(state))
    if not basis:
        return 0.0
    rng = np.random.default_rng(seed)
    weights = rng.normal(scale=scale, size=len(basis))
    coefficients = sum(w * direction for w, direction in zip(weights, basis))
    shifted = replace(state, defining=corrected_defining(state, 2, coefficients))
    probed = willmore_trace(conformal_correct_order3(shifted))
    return float(np.max(np.abs(probed - reference)))


def extension_choice_residual(state: ConformalDefiningState, seed: int = 0, scale: float = 0.3) -> float:
    """Perturb the order-2 correction off Λ and compare F⁽³⁾ on Λ after both runs reach order 3.

    Starts from a state corrected to order 1; meaningful for k ≠ d - 2.
    """
    if state.corrected_to != 1:
        raise ExholError("Extension-choice probe starts from a state corrected to order 1")
    k = state.codimension
    reference = conformal_correct_order3(conformal_correct_order2(state))
    rng = np.random.default_rng(seed)
    perturbation = rng.normal(scale=scale, size=(k, len(correction_monomials(k, 2))))
    perturbed = replace(state, defining=corrected_defining(state, 2, perturbation))
    perturbed = conformal_correct_order3(conformal_correct_order2(perturbed))
    return float(np.max(np.abs(perturbed.obstructions[3].value - reference.obstructions[3].value)))


def extract_willmore_holographic(scene: Scene, frame: Optional[FrameField] = None, order: Optional[int] = None):
    """Order-3 Willmore combination for a surface, with the state that produced it."""
    if scene.tangent_dimension != 2:
        raise DimensionError(f"The holographic Willmore invariant needs dim Λ = 2, got {scene.tangent_dimension}")
    state = construct_conformal(scene, 3, frame, order)
    return state, willmore_trace(state)


# P₂ and the rescaling checks ---------------------------------------------------


def p2_relation_residual(state: ConformalDefiningState, f: JetSeries) -> float:
    """|P₂f - kP₂^⊤f - k w (K_αα - F⁽²⁾_ααββ) f / (d - 2)| at the scene point."""
    if state.corrected_to < 1:
        raise ExholError("P2 needs a defining density with G = δ + O(σ²)")
    k, d = state.codimension, state.dimension
    w = p2_weight(d, k)
    calculus = state.calculus
    s = state.defining
    full = p2_operator(calculus, s, f, w).value
    tangential = p2_tangential(calculus, s, f, w).value
    K = submanifold_tractors(calculus, s).K.value
    F2 = extract_obstruction(state, 2).value
    expected = k * tangential + k * w * (np.trace(K) - np.einsum("aabb->", F2)) / (d - 2) * f.value
    return float(abs(full - expected))


def rescaling_residual(state: ConformalDefiningState, omega: JetSeries) -> float:
    """Conformal Gram of [g; s] against that of [Ω²g; Ωs]."""
    metric: MetricJet = state.metric.rescaled(omega)
    rescaled = TractorCalculus(metric, scale="Ω²g")
    original = conformal_gram(state.calculus, state.defining)
    other = conformal_gram(rescaled, state.defining * omega)
    return (original - other).max_abs()


def _tangential_input(state: ConformalDefiningState, hessian: np.ndarray) -> JetSeries:
    """f = ½ A_ij (u - u₀)^i (u - u₀)^j ∘ u(x): value and gradient vanish at the scene point."""
    y = JetSeries.variables(state.scene.parameters, state.order) - state.scene.parameters
    fbar = jet_einsum("i,ij,j->", y, np.asarray(hessian, dtype=float) * 0.5, y)
    return fbar.compose(state.fiber_parameters)


def p2_principal_symbol_residual(state: ConformalDefiningState, hessian: Optional[np.ndarray] = None) -> float:
    """|P₂f + k ḡ^ij A_ij| for the quadratic f built from A; the principal symbol is -kΔ^⊤."""
    if state.corrected_to < 1:
        raise ExholError("P2 needs a defining density with G = δ + O(σ²)")
    n, k = state.tangent_dimension, state.codimension
    if hessian is None:
        A = np.random.default_rng(0).normal(size=(n, n))
        hessian = A + A.T
    w = p2_weight(state.dimension, k)
    value = p2_operator(state.calculus, state.defining, _tangential_input(state, hessian), w).value
    expected = -k * float(np.einsum("ij,ij->", state.frame.induced_inverse.value, hessian))
    return float(abs(value - expected))


def _lower_order_difference(a: JetSeries, b: JetSeries) -> float:
    """Largest coefficient of a - b below the top u-degree the two jets share."""
    order = max(min(a.order, b.order) - 1, 0)
    return (a.truncate(order) - b.truncate(order)).max_abs()


def p2_tangentiality_residual(state: ConformalDefiningState, f: JetSeries, seed: int = 0, scale: float = 0.3) -> float:
    """Change of P₂f and P₂^⊤f on Λ when f is modified by c_α σ_α e^(Σσ)."""
    if state.corrected_to < 1:
        raise ExholError("P2 needs a defining density with G = δ + O(σ²)")
    w = p2_weight(state.dimension, state.codimension)
    s = state.defining
    c = np.random.default_rng(seed).normal(scale=scale, size=state.codimension)
    modified = f + jet_einsum("z,z->", s, c) * jets.exp(s.sum())
    worst = 0.0
    for operator in (p2_operator, p2_tangential):
        original = operator(state.calculus, s, f, w).compose(state.frame.embedding)
        other = operator(state.calculus, s, modified, w).compose(state.frame.embedding)
        worst = max(worst, _lower_order_difference(original, other))
    return worst


def scale_independence_residual(
    scene: Scene, omega: Optional[Expression] = None, max_order: int = 3, order: Optional[int] = None
) -> Dict[str, float]:
    """Run the construction in g and in Ω²g and compare obstructions on Λ.

    F⁽²⁾ carries weight -2 and the Willmore combination weight -3; residuals are
    entrywise relative with a unit floor.
    """
    rescaled_scene = scene.rescaled(omega)
    factor_scene = scene if omega is None else replace(scene, conformal_factor=omega)
    omega_value = float(factor_scene.omega_at(JetSeries.variables(scene.point, 0)).value)
    original = construct_conformal(scene, max_order, order=order)
    rescaled = construct_conformal(rescaled_scene, max_order, order=order)

    def relative(a: np.ndarray, b: np.ndarray) -> float:
        return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0)))

    residuals: Dict[str, float] = {}
    if max_order >= 2:
        F2, G2 = original.obstructions[2].value, rescaled.obstructions[2].value
        if original.is_k_d_minus_2:
            F2, G2 = antisymmetric_trace(F2), antisymmetric_trace(G2)
        residuals["order-2 obstruction"] = relative(G2, F2 * omega_value ** -2)
    if max_order >= 3 and original.is_k_d_minus_2:
        F3 = willmore_trace(original)
        G3 = willmore_trace(rescaled)
        residuals["willmore combination"] = relative(G3, F3 * omega_value ** -3)
    logger.info(f"Scale independence at Ω(x₀) = {omega_value:.6g}: {residuals}")
    return residuals


def scale_tractor_residual(state: ConformalDefiningState) -> float:
    """N_α on Λ against (0, n_bα, -H_α) below the top u-degree; needs G = δ + O(σ²)."""
    if state.corrected_to < 1:
        raise ExholError("Scale tractors reduce to (0, n, -H) only after the order-1 correction")
    k = state.codimension
    N = scale_tractors(state.calculus, state.defining).compose(state.frame.embedding)
    H = extrinsic_data(state.frame).mean_curvature.reshape(k, 1)
    expected = jets.concatenate([H * 0.0, state.frame.lowered_normals, -H], axis=1)
    return _lower_order_difference(N, expected)
