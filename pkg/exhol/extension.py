"""
Extensions of functions and weighted densities off Λ.

Three problems, all fed by a defining map s_α and the initial extension
f₀ = f̄ ∘ u(x):

* symmetric: kill the symmetrized normal derivatives n^(α₁…α_q)∇_q f̃ for q ≤ m + 1
* restricted: kill the directional derivatives ∇_{n_α} f̃ order by order until
  an obstruction appears
* conformal: kill N·D f̃ and the symmetrized N N D D f̃ on Λ (second order)

Every product with a power of s is taken after zero-padding the other factor
to the full jet order; s vanishes at the scene point, so padding never
reaches a retained coefficient.
"""

import logging
from math import comb, factorial
from typing import List, Optional, Union

import numpy as np

from . import jets
from .conformal import ConformalDefiningState
from .curvature import covariant_derivative
from .defining_map import DefiningMapState, extract_obstruction, normal_field, symmetric_normal_derivatives
from .exceptions import ExcludedWeightError, ExholError, JetOrderError
from .jets import JetSeries, jet_einsum
from .models import ExtensionResult
from .submanifold import extrinsic_data
from .tensors import symmetrize, trace_free
from .tractors import p2_tangential, p2_weight, scale_tractors, submanifold_tractors
from .utils.expressions import Expression, evaluate, parse_expression, scope_names

logger = logging.getLogger(__name__)

OBSTRUCTION_TOL = 1e-7
WEIGHT_TOL = 1e-12
# f̃ is kept to jet order - 2 and checked through two Thomas-D applications of two orders each
CONFORMAL_EXTENSION_ORDER = 2 + 2 * 2
GREEK = "pqrstuvw"

Function = Union[str, Expression, JetSeries]


def _as_expression(state: DefiningMapState, function: Union[str, Expression]) -> Expression:
    if isinstance(function, Expression):
        return function
    return parse_expression(function, scope_names("u", state.tangent_dimension))


def boundary_jet(state: DefiningMapState, function: Function) -> JetSeries:
    """f̄ as a u-jet about u₀."""
    if isinstance(function, JetSeries):
        return function
    inputs = JetSeries.variables(state.scene.parameters, state.frame.order)
    return evaluate(_as_expression(state, function), inputs)


def initial_extension(
    state: DefiningMapState, function: Function, perturbation: Optional[np.ndarray] = None
) -> JetSeries:
    """f₀ = f̄ ∘ u(x), plus c_α s_α exp(Σ_β s_β) when a perturbation c is given."""
    if isinstance(function, JetSeries):
        f0 = function.compose(state.fiber_parameters)
    else:
        f0 = evaluate(_as_expression(state, function), state.fiber_parameters)
    if perturbation is not None:
        s = state.defining
        shift = jet_einsum("z,z->", s, np.asarray(perturbation, dtype=float))
        f0 = f0 + shift * jets.exp(s.sum())
    return f0


def restriction_residual(state: DefiningMapState, extended: JetSeries, function: Function) -> float:
    """|f̃|_Λ - f̄| over the common jet order."""
    along = extended.compose(state.frame.embedding)
    target = boundary_jet(state, function)
    order = min(along.order, target.order)
    return (along.truncate(order) - target.truncate(order)).max_abs()


def _contract_leading(vector: JetSeries, tensor: JetSeries) -> JetSeries:
    letters = "abcdefghij"[: tensor.ndim]
    return jet_einsum(f"{letters[0]},{letters}->{letters[1:]}", vector, tensor)


def _times_powers(s: JetSeries, tensor: JetSeries, count: int) -> JetSeries:
    """s_β₁…s_β_count T_β₁…β_count with T zero-padded to the order of s."""
    result = jets.pad(tensor, s.order)
    for _ in range(count):
        result = _contract_leading(s, result)
    return result


# symmetric ------------------------------------------------------------------


def normal_displacement(state: DefiningMapState) -> JetSeries:
    """v^b = s_β n^b_β, vanishing on Λ."""
    return jet_einsum("z,zb->b", state.defining, jets.pad(normal_field(state), state.order))


def symmetric_terms(state: DefiningMapState, f: JetSeries, count: int) -> List[JetSeries]:
    """(-1)^ℓ/ℓ! v^b₁…v^b_ℓ ∇_b₁…∇_b_ℓ f for ℓ = 0..count."""
    gamma = state.metric_christoffel
    v = normal_displacement(state)
    terms = [f]
    derivative = f
    for ell in range(1, count + 1):
        derivative = covariant_derivative(derivative, gamma, lower=tuple(range(ell - 1)))
        terms.append(_times_powers(v, derivative, ell) * ((-1.0) ** ell / factorial(ell)))
    return terms


def symmetric_extension(
    state: DefiningMapState,
    function: Function,
    m: int,
    initial: Optional[JetSeries] = None,
    partial_sums: bool = False,
) -> ExtensionResult:
    """f̃ = Σ_{ℓ ≤ m+1} (-1)^ℓ/ℓ! s_β₁…s_β_ℓ n^b₁_β₁…n^b_ℓ_β_ℓ ∇_b₁…b_ℓ f₀.

    Needs s corrected to order m; f̃ is then unique modulo O(s^(m+2)) and
    satisfies every symmetrized normal-derivative constraint through q = m + 1.
    """
    if m < 1:
        raise ExholError(f"Symmetric extension order must be positive, got {m}")
    if state.corrected_to < m:
        raise ExholError(
            f"Symmetric extension to order {m} needs a defining map corrected to order {m}, "
            f"have {state.corrected_to}"
        )
    if state.order < m + 2:
        raise JetOrderError(f"Symmetric extension to order {m} needs jet order >= {m + 2}, have {state.order}")
    f0 = initial_extension(state, function) if initial is None else initial
    terms = symmetric_terms(state, f0, m + 1)
    sums = [terms[0]]
    for term in terms[1:]:
        sums.append(sums[-1] + term)
    extended = sums[-1]

    result = ExtensionResult(mode="symmetric", order=m, extended=extended, solved_order=m + 1)
    result.residuals["restriction"] = restriction_residual(state, extended, function)
    for q in range(1, m + 2):
        result.residuals[f"normal derivative q={q}"] = symmetric_normal_derivatives(state, extended, q).max_abs()
    if partial_sums:
        result.partial_sums = sums
    logger.info(f"Symmetric extension to order {m}: worst residual {max(result.residuals.values()):.3e}")
    return result


def binomial_pattern(q: int, partial: int) -> float:
    """Σ_{ℓ ≤ L} (-1)^ℓ C(q, ℓ) = (-1)^L C(q - 1, L): what a partial sum leaves of constraint q."""
    return float((-1) ** partial * comb(q - 1, partial))


# restricted -----------------------------------------------------------------


def directional_derivatives(normals: JetSeries, f: JetSeries) -> JetSeries:
    """n^a_α ∂_a f with the new label first."""
    rest = GREEK[: f.ndim]
    return jet_einsum(f"za,{rest}a->z{rest}", normals, f.gradient())


def restricted_obstruction_formula(state: DefiningMapState, function: Function) -> np.ndarray:
    """-β^b_αβ ∇̄_b f̄ at u₀."""
    beta = extrinsic_data(state.frame).normal_fundamental_form
    dfbar = boundary_jet(state, function).gradient()
    return -jet_einsum("ij,izy,j->zy", state.frame.induced_inverse, beta, dfbar).value


def restricted_extension(
    state: DefiningMapState,
    function: Function,
    max_order: Optional[int] = None,
    initial: Optional[JetSeries] = None,
    tol: float = OBSTRUCTION_TOL,
) -> ExtensionResult:
    """Solve ∇_{n_α} f̃ = O(s^m) for m = 1, 2, … until the first obstruction.

    Order 1 is f₁ = f₀ - s_α ∇_{n_α} f₀. At order m ≥ 2 the derivatives
    T = ∇_{n_γ₁}…∇_{n_γm} f on Λ must be symmetric; the non-symmetric part is the
    obstruction (at m = 2, F_[αβ] = -β^b_αβ ∇̄_b f̄) and the symmetric part is
    removed with -T_(γ)/m! s_γ₁…s_γm.
    """
    order = state.order
    max_order = order - 1 if max_order is None else max_order
    if not 1 <= max_order < order:
        raise JetOrderError(f"Restricted extension order must lie in [1, {order - 1}], got {max_order}")
    if state.corrected_to < min(max_order - 1, 1):
        raise ExholError("Restricted extension needs a defining map with G = δ + O(s)")
    normals = normal_field(state)
    s = state.defining
    f = initial_extension(state, function) if initial is None else initial
    f = f - _times_powers(s, directional_derivatives(normals, f), 1)

    result = ExtensionResult(mode="restricted", order=max_order, extended=f, solved_order=1)
    for m in range(2, max_order + 1):
        T = f
        for _ in range(m):
            T = directional_derivatives(normals, T)
        along = T.compose(state.frame.embedding)  # [γ_m, …, γ_1], outermost first
        symmetric = symmetrize(along, list(range(m)))
        defect = (along - symmetric).max_abs()
        if m == 2:
            F = along.transpose(1, 0)
            result.obstruction = [float(v) for v in ((F - along) * 0.5).value.reshape(-1)]
        if defect > tol:
            result.notes.append(f"obstructed at order {m} (non-symmetric part {defect:.3e})")
            logger.info(f"Restricted extension obstructed at order {m}: {defect:.3e}")
            break
        correction = symmetric.compose(state.fiber_parameters) * (-1.0 / factorial(m))
        f = f + _times_powers(s, correction, m)
        result.solved_order = m
    result.extended = f

    k = state.codimension
    result.residuals["restriction"] = restriction_residual(state, f, function)
    result.residuals["normal derivative"] = directional_derivatives(normals, f).truncate(
        result.solved_order - 1
    ).max_abs()
    if result.obstruction is not None:
        measured = np.asarray(result.obstruction).reshape(k, k)
        expected = restricted_obstruction_formula(state, function)
        result.residuals["obstruction formula"] = float(np.max(np.abs(measured - expected)))
    logger.info(f"Restricted extension solved through order {result.solved_order}")
    return result


# conformal ------------------------------------------------------------------


def conformal_coefficient(d: int, k: int, w: float) -> float:
    """Coefficient of σ_β₁σ_β₁Φ_β₂β₂; singular exactly at w = 1 - (d-k)/2."""
    return (d - 2 * k + 2 * w - 2) / (2 * k * (d - k + 2 * w - 2))


def normal_tractor_derivative(state: ConformalDefiningState, V: JetSeries, weight: float) -> JetSeries:
    """(∇_{n_β} + w ρ_β) V for a single-slot tractor V of weight w, stored [β, A]."""
    calculus = state.calculus
    N = scale_tractors(calculus, state.defining)
    n_up = jet_einsum("ab,zb->za", calculus.metric.inverse, state.defining.gradient())
    along = jet_einsum("Aa,za->zA", calculus.nabla(V, (0,)), n_up)
    return along + jet_einsum("z,A->zA", N[:, -1], V) * weight


def conformal_extension(
    state: ConformalDefiningState,
    function: Function,
    weight: float,
    initial: Optional[JetSeries] = None,
) -> ExtensionResult:
    """Second-order solution of N·D f̃ ≐ 0 and N^(A₁_α₁ N^A₂)_α₂ D_A₁ D_A₂ f̃ ≐ 0.

    f̃ = f - σ_β h(N_β, ĥDf) + ½ σ_β₁σ_β₂ Φ̊_β₁β₂ + c_w σ_β₁σ_β₁ Φ_β₂β₂
        + w/(d-2) σ_β₁σ_β₂ (K_β₁β₂ - F⁽²⁾_β₁β₂γγ) f,
    with Φ_β₁β₂ = h(N_β₂, (∇_{n_β₁} + (w-1)ρ_β₁) ĥDf) symmetrized.

    At w = 1 - (d-k)/2 the c_w term is dropped, only the trace-free second-order
    constraint is imposed and P₂^⊤f̄ is reported as the obstruction.
    """
    calculus = state.calculus
    d, k = state.dimension, state.codimension
    if abs(d + 2 * weight - 2) < WEIGHT_TOL:
        raise ExcludedWeightError(f"Conformal extension is undefined at w = 1 - d/2 = {weight}")
    if state.corrected_to < 2:
        raise ExholError("Conformal extension needs a defining density corrected to order 2")
    order = state.order
    if order < CONFORMAL_EXTENSION_ORDER:
        raise JetOrderError(
            f"Conformal extension needs jet order >= {CONFORMAL_EXTENSION_ORDER}, have {order}"
        )
    sporadic = abs(d - k + 2 * weight - 2) < WEIGHT_TOL

    s = state.defining
    h = calculus.tractor_metric()
    f = initial_extension(state, function) if initial is None else initial
    N = scale_tractors(calculus, s)
    V = calculus.hatted_d(f, weight)
    first = jet_einsum("zA,AB,B->z", N, h, V)
    Phi = jet_einsum("yA,AB,zB->zy", N, h, normal_tractor_derivative(state, V, weight - 1.0))
    Phi = (Phi + Phi.transpose(1, 0)) * 0.5
    trace = jet_einsum("ww->", Phi)
    Phi_tf = Phi - jet_einsum("zy,->zy", np.eye(k) / k, trace)
    K = submanifold_tractors(calculus, s).K
    F2 = extract_obstruction(state, 2).compose(state.fiber_parameters)
    curvature = (K - jet_einsum("zyww->zy", F2)) * (weight / (d - 2))

    extended = f - _times_powers(s, first, 1)
    extended = extended + _times_powers(s, Phi_tf, 2) * 0.5
    extended = extended + _times_powers(s, jet_einsum("zy,->zy", curvature, f), 2)
    if not sporadic:
        square = jet_einsum("z,z->", s, s)
        extended = extended + square * jets.pad(trace, order) * conformal_coefficient(d, k, weight)
    extended = extended.truncate(min(order - 2, K.order + 2, F2.order + 2))

    result = ExtensionResult(mode="conformal", order=2, weight=weight, extended=extended, solved_order=2)
    result.residuals["restriction"] = restriction_residual(state, extended, function)

    D1 = calculus.thomas_d(extended, weight)
    normal_d = jet_einsum("zA,AB,B->z", N, h, D1)
    result.residuals["first-order constraint"] = normal_d.compose(state.frame.embedding).max_abs()
    D2 = calculus.thomas_d(D1, weight - 1.0, tractor_axes=(0,))  # [inner, outer]
    second = jet_einsum("zA,AB,yC,CD,DB->zy", N, h, N, h, D2).value
    second = 0.5 * (second + second.T)
    result.residuals["trace-free second-order constraint"] = float(np.max(np.abs(trace_free(second))))
    if sporadic:
        obstruction = p2_tangential(calculus, s, f, p2_weight(d, k)).compose(state.frame.embedding)
        result.obstruction = [float(obstruction.value)]
        result.residuals["second-order trace"] = float(abs(np.trace(second)))
        result.notes.append("weight 1 - (d-k)/2: trace-free system only, P2^T f̄ reported")
        if abs(float(obstruction.value)) > OBSTRUCTION_TOL:
            result.solved_order = 1
    else:
        result.residuals["second-order constraint"] = float(np.max(np.abs(second)))
    logger.info(
        f"Conformal extension at weight {weight}: "
        + ", ".join(f"{name} {value:.3e}" for name, value in sorted(result.residuals.items()))
    )
    return result
