"""
Bulk curvature from metric jets.

Conventions: Gamma[a, b, c] = Γ^a_bc; riemann[a, b, c, d] = R_ab^c_d with
[∇_a, ∇_b] x^c = R_ab^c_d x^d; Ric_bd = R_cb^c_d; P is the Schouten tensor,
J its trace, W the Weyl tensor and C_abc = ∇_a P_bc - ∇_b P_ac the Cotton tensor.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import DimensionError, JetOrderError, SceneError
from .jets import JetSeries, jet_einsum, jet_inverse_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricJet:
    """Metric g_ab and inverse g^ab as jets about a base point."""

    metric: JetSeries
    inverse: JetSeries

    @classmethod
    def from_jet(cls, metric: JetSeries, tol: float = 1e-10) -> "MetricJet":
        if metric.ndim != 2 or metric.shape[0] != metric.shape[1]:
            raise SceneError(f"Metric must be square, got shape {metric.shape}")
        asym = np.max(np.abs(metric.coeffs - metric.coeffs.swapaxes(0, 1)))
        if asym > tol:
            raise SceneError(f"Metric is not symmetric (max asymmetry {asym:.3e})")
        eigenvalues = np.linalg.eigvalsh(metric.value)
        if np.min(eigenvalues) <= 0:
            raise SceneError(f"Metric is not positive definite at the base point: {eigenvalues}")
        return cls(metric=metric, inverse=jet_inverse_matrix(metric))

    @property
    def dimension(self) -> int:
        return self.metric.shape[0]

    @property
    def order(self) -> int:
        return self.metric.order

    @property
    def base(self) -> np.ndarray:
        return self.metric.base

    def rescaled(self, omega: JetSeries) -> "MetricJet":
        """The metric Ω²g for a positive scalar jet Ω."""
        return MetricJet.from_jet(self.metric * (omega * omega))

    def identity_residual(self) -> float:
        product = jet_einsum("ab,bc->ac", self.metric, self.inverse)
        return (product - np.eye(self.dimension)).max_abs()


def _require(jet: JetSeries, needed: int, what: str) -> None:
    if jet.order < needed:
        raise JetOrderError(f"{what} needs jet order >= {needed}, have {jet.order}")


def christoffel(metric: MetricJet) -> JetSeries:
    """Γ^a_bc, one jet order below the metric."""
    _require(metric.metric, 1, "Christoffel symbols")
    dg = metric.metric.gradient()  # dg[i, j, e] = ∂_e g_ij
    lowered = (dg.transpose(0, 2, 1) + dg - dg.transpose(2, 0, 1)) * 0.5
    return jet_einsum("ad,dbc->abc", metric.inverse, lowered)


def covariant_derivative(
    tensor: JetSeries,
    gamma: JetSeries,
    lower: Sequence[int] = (),
    upper: Sequence[int] = (),
) -> JetSeries:
    """∇ of a tensor with the listed lower/upper bulk axes; derivative index appended last."""
    result = tensor.gradient()
    rank = tensor.ndim
    letters = "abcdefghijkl"[:rank]
    for axis in lower:
        src = letters[:axis] + "y" + letters[axis + 1:]
        spec = f"y{letters[axis]}z,{src}->{letters}z"
        result = result - jet_einsum(spec, gamma, tensor)
    for axis in upper:
        src = letters[:axis] + "y" + letters[axis + 1:]
        spec = f"{letters[axis]}zy,{src}->{letters}z"
        result = result + jet_einsum(spec, gamma, tensor)
    return result


def riemann_tensor(metric: MetricJet, gamma: Optional[JetSeries] = None) -> JetSeries:
    """R_ab^c_d in any dimension, two orders below the metric."""
    _require(metric.metric, 2, "Riemann tensor")
    gamma = christoffel(metric) if gamma is None else gamma
    d_gamma = gamma.gradient()  # d_gamma[c, b, d, a] = ∂_a Γ^c_bd
    derivative = d_gamma.transpose(3, 1, 0, 2) - d_gamma.transpose(1, 3, 0, 2)
    quadratic = jet_einsum("cae,ebd->abcd", gamma, gamma)
    return derivative + quadratic - quadratic.transpose(1, 0, 2, 3)


def lower_riemann(riemann: JetSeries, metric: MetricJet) -> JetSeries:
    """R_abcd = g_ce R_ab^e_d."""
    return jet_einsum("abed,ce->abcd", riemann, metric.metric)


@dataclass(frozen=True)
class CurvatureStack:
    """Bulk curvature tensors, all as jets about the metric base point."""

    metric: MetricJet
    christoffel: JetSeries
    riemann: JetSeries
    riemann_lower: JetSeries
    ricci: JetSeries
    scalar: JetSeries
    schouten: JetSeries
    J: JetSeries
    weyl: JetSeries
    cotton: Optional[JetSeries]

    @property
    def dimension(self) -> int:
        return self.metric.dimension


def schouten_tensor(ricci: JetSeries, scalar: JetSeries, metric: JetSeries, d: int) -> JetSeries:
    return (ricci - metric * (scalar * (1.0 / (2 * (d - 1))))) * (1.0 / (d - 2))


def weyl_tensor(riemann_lower: JetSeries, schouten: JetSeries, metric: JetSeries) -> JetSeries:
    g, P = metric, schouten
    kulkarni = (
        jet_einsum("ac,bd->abcd", g, P)
        - jet_einsum("bc,ad->abcd", g, P)
        - jet_einsum("ad,bc->abcd", g, P)
        + jet_einsum("bd,ac->abcd", g, P)
    )
    return riemann_lower - kulkarni


def curvature_stack(metric: MetricJet, with_cotton: bool = True) -> CurvatureStack:
    """Riemann, Ricci, scalar, Schouten, J, Weyl and (optionally) Cotton."""
    d = metric.dimension
    if d < 3:
        raise DimensionError(f"Curvature stack needs d >= 3, got d = {d}")
    if with_cotton:
        _require(metric.metric, 3, "Cotton tensor")
    gamma = christoffel(metric)
    riemann = riemann_tensor(metric, gamma)
    riemann_lower = lower_riemann(riemann, metric)
    ricci = jet_einsum("cbcd->bd", riemann)
    scalar = jet_einsum("ab,ab->", metric.inverse, ricci)
    schouten = schouten_tensor(ricci, scalar, metric.metric, d)
    J = jet_einsum("ab,ab->", metric.inverse, schouten)
    weyl = weyl_tensor(riemann_lower, schouten, metric.metric)
    cotton = None
    if with_cotton:
        dP = covariant_derivative(schouten, gamma, lower=(0, 1))  # dP[b, c, a] = ∇_a P_bc
        cotton = dP.transpose(2, 0, 1) - dP.transpose(0, 2, 1)
    logger.debug(f"Curvature stack in d={d} to jet order {riemann.order}")
    return CurvatureStack(
        metric=metric,
        christoffel=gamma,
        riemann=riemann,
        riemann_lower=riemann_lower,
        ricci=ricci,
        scalar=scalar,
        schouten=schouten,
        J=J,
        weyl=weyl,
        cotton=cotton,
    )


def metric_compatibility_residual(metric: MetricJet, gamma: JetSeries) -> float:
    """max |∇_c g_ab| over all tracked coefficients."""
    return covariant_derivative(metric.metric, gamma, lower=(0, 1)).max_abs()


def bianchi_residual(stack: CurvatureStack) -> float:
    R = stack.riemann_lower
    cyclic = R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)
    return cyclic.max_abs()


def weyl_trace_residual(stack: CurvatureStack) -> float:
    ginv = stack.metric.inverse
    traces = [
        jet_einsum("ac,abcd->bd", ginv, stack.weyl),
        jet_einsum("ab,abcd->cd", ginv, stack.weyl),
        jet_einsum("ad,abcd->bc", ginv, stack.weyl),
    ]
    return max(t.max_abs() for t in traces)


def cotton_divergence_residual(stack: CurvatureStack) -> float:
    """|C_abc - ∇^d W_abdc / (d - 3)| for d > 3."""
    d = stack.dimension
    if d <= 3 or stack.cotton is None:
        return 0.0
    dW = covariant_derivative(stack.weyl, stack.christoffel, lower=(0, 1, 2, 3))
    divergence = jet_einsum("abdce,de->abc", dW, stack.metric.inverse)
    return (stack.cotton - divergence * (1.0 / (d - 3))).max_abs()
