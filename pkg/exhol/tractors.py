"""
Conformal densities and standard tractors in a fixed scale.

A tractor slot has d + 2 components (top σ, middle μ_a with the index down,
bottom ρ); X = (0, …, 0, 1) and h pairs top with bottom and middle with
middle through g^ab. Thomas-D appends its new tractor slot as the last axis.
All fields are x-jets about the scene point.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from . import jets
from .curvature import MetricJet, covariant_derivative, curvature_stack
from .exceptions import ExcludedWeightError, JetOrderError
from .jets import JetSeries, jet_einsum

logger = logging.getLogger(__name__)

LETTERS = "abcdefghijklmnop"


@dataclass(frozen=True)
class Density:
    """A conformal density of weight w trivialized in the scale ``scale``."""

    value: JetSeries
    weight: float
    scale: str = "g"

    def rescale(self, omega: JetSeries, scale: str = "Ω²g") -> "Density":
        """Representative in the scale Ω²g: f ↦ Ω^w f."""
        return Density(self.value * jets.power(omega, self.weight), self.weight, scale)


@dataclass(frozen=True)
class TractorField:
    """Weighted tractor field; ``tractor_axes`` lists which axes are tractor slots."""

    components: JetSeries
    weight: float
    tractor_axes: Tuple[int, ...] = (0,)
    scale: str = "g"

    def rescale(self, omega: JetSeries, inverse_metric: JetSeries, scale: str = "Ω²g") -> "TractorField":
        """Components in the splitting of Ω²g.

        Per slot: top ↦ Ω(top), middle ↦ Ω(μ + Υ top), bottom ↦ Ω⁻¹(ρ - Υ·μ - ½|Υ|² top),
        with Υ = d log Ω, and an overall Ω^w.
        """
        change = splitting_change(omega, inverse_metric)
        result = self.components
        for axis in self.tractor_axes:
            result = _act(change, result, axis, derivative=False)
        result = result * jets.power(omega, self.weight)
        return TractorField(result, self.weight, self.tractor_axes, scale)


def splitting_change(omega: JetSeries, inverse_metric: JetSeries) -> JetSeries:
    """Matrix S^I_J taking g-splitting components of one slot to those of Ω²g (weight 0)."""
    d = inverse_metric.shape[0]
    upsilon = jets.log(omega).gradient()
    up = jet_einsum("ab,b->a", inverse_metric, upsilon)
    norm = jet_einsum("a,a->", upsilon, up)
    inv_omega = jets.reciprocal(omega)
    zero = omega * 0.0
    rows = []
    top = [omega] + [zero] * (d + 1)
    rows.append(jets.stack(top))
    for a in range(d):
        row = [omega * upsilon[a]] + [omega if b == a else zero for b in range(d)] + [zero]
        rows.append(jets.stack(row))
    bottom = [inv_omega * norm * (-0.5)] + [-(inv_omega * up[b]) for b in range(d)] + [inv_omega]
    rows.append(jets.stack(bottom))
    return jets.stack(rows)


def _act(matrix: JetSeries, tensor: JetSeries, axis: int, derivative: bool = True) -> JetSeries:
    """Apply M^I_J on one axis; with ``derivative`` the matrix carries a leading direction index."""
    letters = LETTERS[: tensor.ndim]
    source = letters[:axis] + "y" + letters[axis + 1:]
    if derivative:
        spec = f"z{letters[axis]}y,{source}->{letters}z"
    else:
        spec = f"{letters[axis]}y,{source}->{letters}"
    return jet_einsum(spec, matrix, tensor)


class TractorCalculus:
    """Tractor metric, connection, Laplacian and Thomas-D for one metric representative."""

    def __init__(self, metric: MetricJet, scale: str = "g"):
        if metric.order < 2:
            raise JetOrderError("Tractor calculus needs the metric to jet order >= 2")
        self.metric = metric
        self.scale = scale
        self.dimension = metric.dimension
        stack = curvature_stack(metric, with_cotton=False)
        self.christoffel = stack.christoffel
        self.schouten = stack.schouten
        self.J = stack.J
        self.connection = self._connection_matrix()
        logger.debug(f"Tractor calculus in d={self.dimension} to jet order {self.J.order}")

    @property
    def size(self) -> int:
        return self.dimension + 2

    @property
    def order(self) -> int:
        return self.J.order

    def _connection_matrix(self) -> JetSeries:
        """𝒜[a, I, J] with ∇_a T = ∂_a T + 𝒜_a T on a single slot."""
        d = self.dimension
        g = self.metric.metric.truncate(self.schouten.order)
        gamma = self.christoffel.truncate(self.schouten.order)
        P = self.schouten
        P_up = jet_einsum("bc,ac->ab", self.metric.inverse, P)
        coeffs = np.zeros((d, d + 2, d + 2, P.space.size))
        for a in range(d):
            coeffs[a, 0, 1 + a, 0] = -1.0
            for b in range(d):
                coeffs[a, 1 + b, 1:d + 1] = -gamma.coeffs[:, a, b]
                coeffs[a, 1 + b, d + 1] = g.coeffs[a, b]
                coeffs[a, 1 + b, 0] = P.coeffs[a, b]
                coeffs[a, d + 1, 1 + b] = -P_up.coeffs[a, b]
        return P.like(coeffs)

    def tractor_metric(self) -> JetSeries:
        d = self.dimension
        inverse = self.metric.inverse
        coeffs = np.zeros((d + 2, d + 2, inverse.space.size))
        coeffs[0, d + 1, 0] = 1.0
        coeffs[d + 1, 0, 0] = 1.0
        coeffs[1:d + 1, 1:d + 1] = inverse.coeffs
        return inverse.like(coeffs)

    def canonical(self) -> JetSeries:
        """X^A = (0, …, 0, 1)."""
        x = np.zeros(self.size)
        x[-1] = 1.0
        return JetSeries.constant(x, self.metric.metric.space, self.metric.base)

    def pair(self, T: JetSeries, U: JetSeries, t_axis: int = 0, u_axis: int = 0) -> JetSeries:
        """h(T, U) over one slot of each; remaining axes of T then U are kept in order."""
        t_letters = LETTERS[: T.ndim]
        u_letters = LETTERS[T.ndim: T.ndim + U.ndim]
        y, z = "yz"
        t_spec = t_letters[:t_axis] + y + t_letters[t_axis + 1:]
        u_spec = u_letters[:u_axis] + z + u_letters[u_axis + 1:]
        out = t_letters[:t_axis] + t_letters[t_axis + 1:] + u_letters[:u_axis] + u_letters[u_axis + 1:]
        return jet_einsum(f"{t_spec},{y}{z},{u_spec}->{out}", T, self.tractor_metric(), U)

    def nabla(self, T: JetSeries, tractor_axes: Sequence[int] = (), lower: Sequence[int] = ()) -> JetSeries:
        """Coupled Levi-Civita/tractor derivative; the direction index is appended last."""
        result = covariant_derivative(T, self.christoffel, lower=lower)
        for axis in tractor_axes:
            result = result + _act(self.connection, T, axis)
        return result

    def laplacian(self, T: JetSeries, tractor_axes: Sequence[int] = (), lower: Sequence[int] = ()) -> JetSeries:
        first = self.nabla(T, tractor_axes, lower)
        second = self.nabla(first, tractor_axes, tuple(lower) + (T.ndim,))
        letters = LETTERS[: T.ndim]
        return jet_einsum(f"{letters}yz,yz->{letters}", second, self.metric.inverse)

    def thomas_d(self, T: JetSeries, weight: float, tractor_axes: Sequence[int] = ()) -> JetSeries:
        """D_A T = ((d+2w-2) w T, (d+2w-2) ∇_a T, -(Δ + wJ) T), new slot last."""
        factor = self.dimension + 2 * weight - 2
        top = (T * (factor * weight)).reshape(T.shape + (1,))
        middle = self.nabla(T, tractor_axes) * factor
        bottom = -(self.laplacian(T, tractor_axes) + T * self.J * weight)
        return jets.concatenate([top, middle, bottom.reshape(T.shape + (1,))], axis=-1)

    def hatted_d(self, T: JetSeries, weight: float, tractor_axes: Sequence[int] = ()) -> JetSeries:
        """ĥD = D / (d + 2w - 2); undefined at w = 1 - d/2."""
        factor = self.dimension + 2 * weight - 2
        if abs(factor) < 1e-12:
            raise ExcludedWeightError(
                f"Hatted Thomas-D is undefined at weight {weight} in dimension {self.dimension}"
            )
        return self.thomas_d(T, weight, tractor_axes) * (1.0 / factor)

    def apply(self, field: Union[Density, TractorField], hatted: bool = False) -> TractorField:
        """Thomas-D on a typed field; the weight drops by one."""
        if isinstance(field, Density):
            values, axes = field.value, ()
        else:
            values, axes = field.components, field.tractor_axes
        operator = self.hatted_d if hatted else self.thomas_d
        result = operator(values, field.weight, axes)
        return TractorField(result, field.weight - 1, tuple(axes) + (values.ndim,), self.scale)

    # identities -----------------------------------------------------------

    def metric_compatibility_residual(self, T: JetSeries, U: JetSeries) -> float:
        """|∂_a h(T, U) - h(∇_a T, U) - h(T, ∇_a U)| for single-slot tractors."""
        lhs = self.pair(T, U).gradient()
        rhs = self.pair(self.nabla(T, (0,)), U) + self.pair(T, self.nabla(U, (0,)))
        return (lhs - rhs).max_abs()

    def double_d_residual(self, f: JetSeries, weight: float) -> float:
        """Relative size of D_A D^A f."""
        Df = self.thomas_d(f, weight)
        DDf = self.thomas_d(Df, weight - 1, tractor_axes=(0,))
        trace = jet_einsum("AB,AB->", DDf, self.tractor_metric())
        scale = max(DDf.max_abs(), 1.0)
        return trace.max_abs() / scale


def leibniz_defect(
    calculus: TractorCalculus, f1: JetSeries, w1: float, f2: JetSeries, w2: float
) -> Tuple[JetSeries, JetSeries]:
    """Both sides of ĥD(f₁f₂) - f₁ĥDf₂ - f₂ĥDf₁ = -2/(d+2w-2) X (ĥDf₁·ĥDf₂), w = w₁ + w₂."""
    w = w1 + w2
    D1 = calculus.hatted_d(f1, w1)
    D2 = calculus.hatted_d(f2, w2)
    lhs = calculus.hatted_d(f1 * f2, w) - D2 * f1 - D1 * f2
    factor = calculus.dimension + 2 * w - 2
    rhs = calculus.canonical() * (calculus.pair(D1, D2) * (-2.0 / factor))
    return lhs, rhs


# scale tractors and submanifold tractors --------------------------------------


def scale_tractors(calculus: TractorCalculus, defining: JetSeries) -> JetSeries:
    """N_α = ĥD σ_α for weight-one σ_α, stored [α, A]."""
    return calculus.hatted_d(defining, 1.0)


def conformal_gram(calculus: TractorCalculus, defining: JetSeries) -> JetSeries:
    """G_αβ = h(N_α, N_β) = ∇s_α·∇s_β - (1/d)(s_α(Δ+J)s_β + s_β(Δ+J)s_α)."""
    N = scale_tractors(calculus, defining)
    return calculus.pair(N, N, t_axis=1, u_axis=1)


def conformal_gram_direct(calculus: TractorCalculus, defining: JetSeries) -> JetSeries:
    d = calculus.dimension
    ds = defining.gradient()
    gradient_part = jet_einsum("ab,za,yb->zy", calculus.metric.inverse, ds, ds)
    operator = calculus.laplacian(defining) + defining * calculus.J
    mixed = jet_einsum("z,y->zy", defining, operator)
    return gradient_part - (mixed + mixed.transpose(1, 0)) * (1.0 / d)


@dataclass
class SubmanifoldTractors:
    """Scale tractors and the tractors built from them, as x-jets."""

    normals: JetSeries
    rho: JetSeries
    B: JetSeries
    P: JetSeries
    K: JetSeries
    checks: Dict[str, float] = field(default_factory=dict)


def submanifold_tractors(calculus: TractorCalculus, defining: JetSeries) -> SubmanifoldTractors:
    """B_αβ = N_[α·ĥD N_β], P_α = ĥD N_α, K_αβ = P_α·P_β and ρ_α = bottom slot of N_α."""
    N = scale_tractors(calculus, defining)
    P = calculus.hatted_d(N, 0.0, tractor_axes=(1,))  # [α, B, A]
    paired = calculus.pair(N, P, t_axis=1, u_axis=1)  # [α, β, A]
    B = (paired - paired.transpose(1, 0, 2)) * 0.5
    h = calculus.tractor_metric()
    K = jet_einsum("zAB,AC,BD,yCD->zy", P, h, h, P)
    X = calculus.canonical()
    result = SubmanifoldTractors(normals=N, rho=N[:, -1], B=B, P=P, K=K)
    result.checks["X·B"] = float(np.max(np.abs(calculus.pair(B, X, t_axis=2).value)))
    return result


def divergence_residual(calculus: TractorCalculus, B: JetSeries) -> Optional[float]:
    """|ĥD_A B^A_αβ| at the scene point; None where ĥD is excluded at weight -1."""
    weight = -1.0
    if abs(calculus.dimension + 2 * weight - 2) < 1e-12:
        return None
    DB = calculus.hatted_d(B, weight, tractor_axes=(2,))  # [α, β, A, A']
    trace = jet_einsum("zyAC,AC->zy", DB, calculus.tractor_metric())
    return float(np.max(np.abs(trace.value)))


def p2_weight(d: int, k: int) -> float:
    return (2 + k - d) / 2.0


def _check_p2_weight(calculus: TractorCalculus, k: int, weight: float) -> float:
    expected = p2_weight(calculus.dimension, k)
    if abs(weight - expected) > 1e-12:
        raise ExcludedWeightError(f"P2 acts on weight {expected}, got {weight}")
    return expected


def p2_operator(calculus: TractorCalculus, defining: JetSeries, f: JetSeries, weight: float) -> JetSeries:
    """P₂ f = [∇_{n_α} U_α + (w-1) ρ_α U_α] with U_α = N_α·D f, as an x-jet.

    Only its restriction to Λ is meaningful; the σ-proportional term of the
    second Thomas-D is dropped because it vanishes there.
    """
    k = defining.shape[0]
    w = _check_p2_weight(calculus, k, weight)
    N = scale_tractors(calculus, defining)
    U = calculus.pair(N, calculus.thomas_d(f, w), t_axis=1)  # [α]
    n_up = jet_einsum("ab,zb->za", calculus.metric.inverse, defining.gradient())
    directional = jet_einsum("za,za->", n_up, U.gradient())
    return directional + jet_einsum("z,z->", N[:, -1], U) * (w - 1.0)


def p2_tangential(calculus: TractorCalculus, defining: JetSeries, f: JetSeries, weight: float) -> JetSeries:
    """P₂^⊤ f = N^A_β N^B_β ĥD_A ĥD_B f, restricted form (σ-terms dropped)."""
    k = defining.shape[0]
    w = _check_p2_weight(calculus, k, weight)
    N = scale_tractors(calculus, defining)
    V = calculus.hatted_d(f, w)  # weight w - 1
    n_up = jet_einsum("ab,zb->za", calculus.metric.inverse, defining.gradient())
    nabla_V = calculus.nabla(V, (0,))  # [B, a]
    along = jet_einsum("Ba,za->zB", nabla_V, n_up) + jet_einsum("z,B->zB", N[:, -1], V) * (w - 1.0)
    return jet_einsum("zA,AB,zB->", N, calculus.tractor_metric(), along)
