"""
Canonical Riemannian defining map, built order by order as bulk jets.

The initial map comes from the tubular parametrization Φ(u, t) = ι(u) + t_α n_α(u);
s_α are the t-components of Φ⁻¹. Each order m then reads the Gram matrix
G_αβ = g⁻¹(ds_α, ds_β) in the fiber chart x ↦ (u(x), s(x)),

    G = δ + F⁽ᵐ⁾_αβγ₁…γₘ(u) σ_γ₁ … σ_γₘ + O(σ^(m+1)),

and removes what it can of F⁽ᵐ⁾ with s̃_α = s_α + A_αβ₁…β_(m+1)(u) s_β₁ … s_β_(m+1).
The linear update map A ↦ ΔF is measured by probing rather than transcribed.
"""

import logging
from dataclasses import dataclass, field, replace
from math import factorial
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from . import jets
from .curvature import CurvatureStack, MetricJet, christoffel, covariant_derivative
from .exceptions import ExholError, JetOrderError
from .jets import JetSeries, jet_einsum, jet_map_inverse, jet_space
from .submanifold import (
    ExtrinsicData,
    FrameField,
    Scene,
    build_frame,
    extrinsic_data,
    frame_components,
)
from .tensors import (
    RemovalResult,
    project_window22,
    remove_correctable,
    symmetric_monomials,
    symmetric_tensor_from_coefficients,
    symmetrize,
)

logger = logging.getLogger(__name__)

Coefficients = Union[JetSeries, np.ndarray]


@dataclass
class DefiningMapState:
    """Defining map s_α about x₀ together with its correction history."""

    scene: Scene
    frame: FrameField
    metric: MetricJet
    defining: JetSeries
    fiber_parameters: JetSeries
    corrected_to: int = 0
    obstructions: Dict[int, JetSeries] = field(default_factory=dict)
    corrections: Dict[int, JetSeries] = field(default_factory=dict)
    removals: Dict[int, RemovalResult] = field(default_factory=dict)
    checks: Dict[str, float] = field(default_factory=dict)

    @property
    def order(self) -> int:
        return self.defining.order

    @property
    def codimension(self) -> int:
        return self.scene.codimension

    @property
    def tangent_dimension(self) -> int:
        return self.scene.tangent_dimension

    @property
    def minimum_order_offset(self) -> int:
        """Jet orders consumed between s and the Gram matrix."""
        return 1

    @property
    def metric_christoffel(self) -> JetSeries:
        return christoffel(self.metric)

    def required_order(self, m: int) -> int:
        return m + 2

    def gram(self, defining: Optional[JetSeries] = None) -> JetSeries:
        """G_αβ = g^ab ∂_a s_α ∂_b s_β."""
        s = self.defining if defining is None else defining
        ds = s.gradient()
        return jet_einsum("ab,za,yb->zy", self.metric.inverse, ds, ds)


def _tubular_map(frame: FrameField, order: int) -> JetSeries:
    """Φ(u, t) = ι(u) + t_α n_α(u) as a jet about (u₀, 0)."""
    n, k = frame.tangent_dimension, frame.codimension
    base = np.concatenate([frame.scene.parameters, np.zeros(k)])
    variables = JetSeries.variables(base, order)
    lift = variables[:n]
    iota = frame.embedding.compose(lift)
    normals = frame.normals.compose(lift)
    return iota + jet_einsum("z,za->a", variables[n:], normals)


def build_initial(scene: Scene, frame: Optional[FrameField] = None, order: Optional[int] = None) -> DefiningMapState:
    """Tubular defining map s_α = t_α ∘ Φ⁻¹ with the frame as normals."""
    order = scene.jet_order if order is None else order
    if order < 2:
        raise JetOrderError(f"Defining map needs jet order >= 2, got {order}")
    frame = build_frame(scene, order) if frame is None else frame
    order = min(order, frame.order)
    inverse = jet_map_inverse(_tubular_map(frame, order))
    n = scene.tangent_dimension
    state = DefiningMapState(
        scene=scene,
        frame=frame,
        metric=scene.metric_jet(order),
        defining=inverse[n:],
        fiber_parameters=inverse[:n],
    )
    logger.info(f"Initial defining map for {scene.name or '<unnamed>'} to jet order {order}")
    return state


def gram_matrix(state: DefiningMapState) -> JetSeries:
    return state.gram()


def fiber_chart(state: DefiningMapState, order: Optional[int] = None) -> JetSeries:
    """Ψ: (u, σ) ↦ x, inverse of x ↦ (u(x), s(x))."""
    chart = jets.concatenate([state.fiber_parameters, state.defining])
    if order is not None:
        chart = chart.truncate(min(order, chart.order))
    return jet_map_inverse(chart)


def fiber_coefficient(jet: JetSeries, n: int, exponent: Sequence[int]) -> JetSeries:
    """Coefficient of σ^exponent in a (u, σ)-jet, as a u-jet about u₀."""
    exponent = tuple(int(e) for e in exponent)
    order = jet.order - sum(exponent)
    if order < 0:
        raise JetOrderError(f"Jet of order {jet.order} has no σ-degree {sum(exponent)} part")
    u_space = jet_space(n, order)
    positions = [jet.space.index[tuple(int(a) for a in e) + exponent] for e in u_space.exponents]
    return JetSeries(jet.coeffs[..., positions], u_space, jet.base[:n])


def obstruction_from_fiber(fiber_jet: JetSeries, n: int, k: int, m: int) -> JetSeries:
    """σ-degree m part of a (u, σ)-jet as a symmetric-in-γ tensor of u-jets."""
    monomials = symmetric_monomials(k, m)
    parts = [fiber_coefficient(fiber_jet, n, e) for e in monomials]
    stacked = np.stack([p.coeffs for p in parts], axis=-1)  # (..., usize, nmon)
    tensor = symmetric_tensor_from_coefficients(stacked, k, m)  # (..., usize, k^m)
    lead = fiber_jet.ndim
    coeffs = np.moveaxis(tensor, lead, -1)
    return JetSeries(coeffs, parts[0].space, parts[0].base)


def extract_obstruction(state: DefiningMapState, m: int, defining: Optional[JetSeries] = None, chart: Optional[JetSeries] = None) -> JetSeries:
    """F⁽ᵐ⁾(u) read from the Gram matrix in the fiber chart."""
    chart = fiber_chart(state) if chart is None else chart
    gram = state.gram(defining)
    fiber_gram = gram.compose(chart)
    return obstruction_from_fiber(fiber_gram, state.tangent_dimension, state.codimension, m)


def correction_monomials(k: int, m: int) -> Tuple[Tuple[int, ...], ...]:
    """Monomials s^e, |e| = m + 1, parametrizing the order-m correction."""
    return symmetric_monomials(k, m + 1)


def _powers(defining: JetSeries, exponents: Sequence[Sequence[int]]) -> JetSeries:
    terms = []
    for e in exponents:
        term = defining.lift(1.0)
        for v, power in enumerate(e):
            for _ in range(power):
                term = term * defining[v]
        terms.append(term)
    return jets.stack(terms)


def corrected_defining(state: DefiningMapState, m: int, coefficients: Coefficients, defining: Optional[JetSeries] = None) -> JetSeries:
    """s + A(u(x)) s^(m+1) with A given per (α, monomial), fiber-constant."""
    s = state.defining if defining is None else defining
    powers = _powers(s, correction_monomials(state.codimension, m))
    if isinstance(coefficients, JetSeries):
        along = jets.pad(coefficients.compose(state.fiber_parameters), s.order)
    else:
        along = np.asarray(coefficients, dtype=float)
    return s + jet_einsum("zp,p->z", along, powers)


def measure_update_matrix(state: DefiningMapState, m: int) -> np.ndarray:
    """Columns are ΔF⁽ᵐ⁾(u₀) for unit constant corrections, flattened in full."""
    k = state.codimension
    monomials = correction_monomials(k, m)
    probe_order = m + state.minimum_order_offset
    s = state.defining.truncate(min(probe_order, state.order))
    probe_state = replace(state, defining=s, fiber_parameters=state.fiber_parameters.truncate(s.order))
    chart = fiber_chart(probe_state)
    reference = extract_obstruction(probe_state, m, chart=chart).value.reshape(-1)
    columns = []
    for alpha in range(k):
        for p in range(len(monomials)):
            unit = np.zeros((k, len(monomials)))
            unit[alpha, p] = 1.0
            probed = corrected_defining(probe_state, m, unit)
            value = extract_obstruction(probe_state, m, defining=probed, chart=chart).value
            columns.append(value.reshape(-1) - reference)
    matrix = np.stack(columns, axis=1)
    logger.debug(f"Measured order-{m} update map of shape {matrix.shape}")
    return matrix


def symmetric_to_monomial(tensor: np.ndarray, k: int, degree: int) -> np.ndarray:
    """Monomial coefficients of T_α β₁…β_degree s_β₁…s_β_degree (T symmetric in β)."""
    monomials = symmetric_monomials(k, degree)
    out = np.zeros(tensor.shape[:1] + (len(monomials),) + tensor.shape[1 + degree:])
    for p, e in enumerate(monomials):
        indices = tuple(v for v, count in enumerate(e) for _ in range(count))
        multiplicity = factorial(degree) / np.prod([factorial(c) for c in e])
        out[:, p] = tensor[(slice(None),) + indices] * multiplicity
    return out


def first_order_correction(F1: JetSeries) -> JetSeries:
    """A_αβγ = -¼(F_αβγ + F_αγβ - F_βγα), as monomial coefficients (k, nmon)."""
    k = F1.shape[0]
    A = (F1 + F1.transpose(0, 2, 1) - F1.transpose(2, 0, 1)) * (-0.25)
    coeffs = symmetric_to_monomial(A.coeffs, k, 2)
    return JetSeries(coeffs, F1.space, F1.base)


def remove_order(
    state: DefiningMapState,
    m: int,
    cancel_projector: Optional[np.ndarray] = None,
    update_matrix: Optional[np.ndarray] = None,
) -> Tuple[DefiningMapState, RemovalResult, JetSeries]:
    """Least-squares removal of F⁽ᵐ⁾; returns the new state, the solve and the raw F⁽ᵐ⁾."""
    if m > state.corrected_to + 1:
        raise ExholError(f"State is corrected to order {state.corrected_to}; cannot correct order {m}")
    needed = state.required_order(m)
    if state.order < needed:
        raise JetOrderError(f"Order-{m} correction needs jet order >= {needed}, have {state.order}")
    raw = extract_obstruction(state, m)
    M = measure_update_matrix(state, m) if update_matrix is None else update_matrix
    flat = raw.coeffs.reshape(-1, raw.space.size)
    removal = remove_correctable(flat, M, cancel_projector)
    k = state.codimension
    nmon = len(correction_monomials(k, m))
    A = JetSeries(removal.solution.reshape(k, nmon, raw.space.size), raw.space, raw.base)
    new = _with_correction(state, m, A)
    new.removals[m] = removal
    return new, removal, raw


def _with_correction(state: DefiningMapState, m: int, A: JetSeries) -> DefiningMapState:
    defining = corrected_defining(state, m, A)
    new = replace(
        state,
        defining=defining,
        corrected_to=max(state.corrected_to, m),
        obstructions=dict(state.obstructions),
        corrections=dict(state.corrections),
        removals=dict(state.removals),
        checks=dict(state.checks),
    )
    new.corrections[m] = A
    new.obstructions[m] = extract_obstruction(new, m)
    return new


def correct_to_order(state: DefiningMapState, m: int) -> DefiningMapState:
    """Apply the order-m correction (closed form at m = 1, least squares above)."""
    if m == 1:
        if state.order < state.required_order(1):
            raise JetOrderError(
                f"Order-1 correction needs jet order >= {state.required_order(1)}, have {state.order}"
            )
        raw = extract_obstruction(state, 1)
        new = _with_correction(state, 1, first_order_correction(raw))
        new.checks["first-order residual"] = new.obstructions[1].max_abs()
    else:
        new, removal, raw = remove_order(state, m)
        if m == 2:
            residual = new.obstructions[2].value
            new.checks["window residual"] = float(np.max(np.abs(residual - project_window22(residual))))
        if removal.rank_deficient:
            logger.warning(f"Order-{m} system has rank {removal.rank} of {removal.projected_matrix.shape[1]}")
    logger.info(
        f"Corrected defining map to order {m}; residual max {new.obstructions[m].max_abs():.3e}"
    )
    return new


def construct(scene: Scene, max_order: int, frame: Optional[FrameField] = None, order: Optional[int] = None) -> DefiningMapState:
    state = build_initial(scene, frame, order)
    for m in range(1, max_order + 1):
        state = correct_to_order(state, m)
    return state


def gram_residual(state: DefiningMapState) -> float:
    """Largest coefficient of G - δ below σ-degree corrected_to + 1 that a correction still reaches.

    The part of F⁽ᵐ⁾ outside the range of the order-m update map is the
    obstruction itself (the window class at m = 2) and is not counted.
    """
    chart = fiber_chart(state)
    fiber_gram = state.gram().compose(chart)
    n, k = state.tangent_dimension, state.codimension
    worst = (fiber_coefficient(fiber_gram, n, (0,) * k) - np.eye(k)).max_abs()
    for m in range(1, state.corrected_to + 1):
        flat = obstruction_from_fiber(fiber_gram, n, k, m).coeffs.reshape(k ** (m + 2), -1)
        removal = state.removals.get(m)
        if removal is not None and removal.projected_matrix.shape[0] == flat.shape[0]:
            M = removal.projected_matrix
            flat = M @ linalg.lstsq(M, flat, cond=1e-10)[0]
        worst = max(worst, float(np.max(np.abs(flat))))
    return worst


# closed-form comparisons ----------------------------------------------------


def orthogonal_residual(tensor: np.ndarray, update_matrix: np.ndarray) -> np.ndarray:
    """Component of a flattened tensor orthogonal to the range of the update map."""
    flat = np.asarray(tensor, dtype=float).reshape(-1)
    solution = linalg.lstsq(update_matrix, flat, cond=1e-10)[0]
    return (flat - update_matrix @ solution).reshape(np.shape(tensor))


def f2_formula(
    state: DefiningMapState,
    data: Optional[ExtrinsicData] = None,
    stack: Optional[CurvatureStack] = None,
) -> np.ndarray:
    """−β_cα(γ₁β^c_γ₂)β − ⅓R_γ₁(αβ)γ₂ at u₀, symmetrized in αβ and γ₁γ₂."""
    data = extrinsic_data(state.frame) if data is None else data
    stack = state.scene.bulk_curvature(with_cotton=False) if stack is None else stack
    n = state.tangent_dimension
    beta = data.normal_fundamental_form.value
    ginv = state.frame.induced_inverse.value
    normal = slice(n, None)
    R = frame_components(stack.riemann_lower, state.frame).value[normal, normal, normal, normal]
    quadratic = np.einsum("iac,ij,jdb->abcd", beta, ginv, beta)
    curvature = np.einsum("cabd->abcd", R)
    total = -quadratic - curvature / 3.0
    return symmetrize(symmetrize(total, [0, 1]), [2, 3])


def verify_F2_formula(
    state: DefiningMapState,
    data: Optional[ExtrinsicData] = None,
    stack: Optional[CurvatureStack] = None,
) -> float:
    """Max difference between the extracted order-2 obstruction and the closed form."""
    if state.corrected_to < 2:
        raise ExholError("The order-2 obstruction needs a state corrected to order 2")
    extracted = state.obstructions[2].value
    M = state.removals[2].projected_matrix
    expected = orthogonal_residual(f2_formula(state, data, stack), M)
    return float(np.max(np.abs(extracted - expected)))


# derivative identities ------------------------------------------------------


def normal_field(state: DefiningMapState) -> JetSeries:
    """n^a_α = g^ab ∂_b s_α as bulk x-jets, stored [α, a]."""
    return jet_einsum("ab,zb->za", state.metric.inverse, state.defining.gradient())


def symmetric_normal_derivatives(
    state: DefiningMapState,
    tensor: JetSeries,
    q: int,
    lower: Sequence[int] = (),
    upper: Sequence[int] = (),
) -> JetSeries:
    """n^{a₁…a_q}_(α₁…α_q) ∇_{a₁…a_q} T along Λ, as a u-jet.

    ``tensor`` is a bulk x-jet; ``lower``/``upper`` name its bulk axes and any
    other axis is a Greek label. The q new Greek indices are appended
    and symmetrized.
    """
    gamma = state.metric_christoffel
    result = tensor
    rank = tensor.ndim
    normals = normal_field(state)
    for step in range(q):
        derivative_lower = tuple(lower) + tuple(range(rank, rank + step))
        result = covariant_derivative(result, gamma, lower=derivative_lower, upper=upper)
    letters = "abcdefghij"[: rank + q]
    greek = "pqrstuvw"[:q]
    spec = letters + "," + ",".join(f"{g}{letters[rank + i]}" for i, g in enumerate(greek))
    spec += "->" + letters[:rank] + greek
    contracted = jet_einsum(spec, result, *([normals] * q))
    if q > 1:
        contracted = symmetrize(contracted, list(range(rank, rank + q)))
    return contracted.compose(state.frame.embedding)


def gradient_frame_residuals(state: DefiningMapState, data: Optional[ExtrinsicData] = None) -> Dict[str, float]:
    """Hessian blocks of s_β on Λ against II, β and zero."""
    data = extrinsic_data(state.frame) if data is None else data
    hessian = covariant_derivative(state.defining.gradient(), state.metric_christoffel, lower=(1,))
    hessian = hessian.transpose(1, 2, 0)  # [a, b, β] = ∇_b ∇_a s_β
    blocks = frame_components_mixed(hessian, state.frame)
    n = state.tangent_dimension
    t, v = slice(0, n), slice(n, None)
    II = data.second_fundamental_form
    beta = data.normal_fundamental_form
    return {
        "gradient frame tangential Hessian": (blocks[t, t] - II).max_abs(),
        "gradient frame normal fundamental form": (blocks[t, v] - beta).max_abs(),
        "gradient frame normal Hessian": blocks[v, v].max_abs(),
    }


def frame_components_mixed(tensor: JetSeries, frame: FrameField) -> JetSeries:
    """Adapted-basis components of a bulk tensor whose last axis is a Greek label."""
    along = tensor.compose(frame.embedding)
    basis = frame.adapted_basis
    return jet_einsum("abz,aA,bB->ABz", along, basis, basis)


def extension_independence_residual(state: DefiningMapState, seed: int = 0, scale: float = 0.3) -> Dict[str, float]:
    """Perturb the order-1 correction off Λ and compare the order-2 results.

    The perturbation adds P_αβγδ s_β s_γ s_δ to the order-1 map; after the
    order-2 correction both runs must agree on F⁽²⁾|_Λ and on s through degree 3.
    """
    if state.corrected_to != 0:
        raise ExholError("Extension probe starts from an uncorrected state")
    k = state.codimension
    reference = correct_to_order(correct_to_order(state, 1), 2)

    rng = np.random.default_rng(seed)
    nmon = len(correction_monomials(k, 2))
    perturbation = rng.normal(scale=scale, size=(k, nmon))
    first = correct_to_order(state, 1)
    perturbed = replace(first, defining=corrected_defining(first, 2, perturbation))
    perturbed = correct_to_order(perturbed, 2)

    size = jet_space(perturbed.defining.nvars, 3).size
    jet_difference = perturbed.defining.coeffs[..., :size] - reference.defining.coeffs[..., :size]
    return {
        "order-2 obstruction": float(
            np.max(np.abs(perturbed.obstructions[2].value - reference.obstructions[2].value))
        ),
        "defining map through degree 3": float(np.max(np.abs(jet_difference))),
    }
