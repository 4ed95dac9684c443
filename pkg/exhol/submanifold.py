"""
Submanifold geometry along Λ = ι(U) as jets in the tangential parameters u.

A Scene holds the parsed metric, embedding and optional frame seeds. Frames
carry the normal vectors n^a_α as u-jets, so every restricted quantity can be
differentiated along Λ without re-deriving it.

Index layout used throughout:

* ``tangents[a, i]``   E^a_i = ∂_i ι^a
* ``normals[α, a]``    n^a_α
* ``II[i, j, α]``      E_j · ∇_i n_α
* ``beta[i, α, β]``    g(n_α, ∇_i n_β)
* ``curvature[i, j, α, β]`` normal curvature ℛ_ijαβ
"""

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import jets
from .curvature import (
    CurvatureStack,
    MetricJet,
    christoffel,
    covariant_derivative,
    curvature_stack,
    lower_riemann,
    riemann_tensor,
)
from .exceptions import DimensionError, JetOrderError, SceneError
from .jets import JetSeries, jet_einsum, jet_inverse_matrix
from .utils.expressions import (
    BinaryOp,
    Expression,
    Power,
    Token,
    evaluate,
    evaluate_all,
    parse_expression,
    scope_names,
    tokenize,
)

logger = logging.getLogger(__name__)

RANK_TOL = 1e-8
ORTHOGONALITY_TOL = 1e-10


def _parameter_count(sources: Sequence[str]) -> int:
    """One past the largest u-index referenced by the sources."""
    count = 0
    for source in sources:
        for token in tokenize(str(source)):
            if token.typ == Token.identifier and token.text[:1] == "u" and token.text[1:].isdigit():
                count = max(count, int(token.text[1:]) + 1)
    return count


@dataclass(frozen=True)
class Scene:
    """Bulk metric, embedding and frame seeds evaluated about a base parameter."""

    dimension: int
    codimension: int
    metric: Tuple[Tuple[Expression, ...], ...]
    embedding: Tuple[Expression, ...]
    base_point: Tuple[float, ...]
    frame_seeds: Optional[Tuple[Tuple[Expression, ...], ...]] = None
    conformal_factor: Optional[Expression] = None
    jet_order: int = 6
    name: str = ""

    def __post_init__(self):
        d, k = self.dimension, self.codimension
        if d < 3:
            raise DimensionError(f"Bulk dimension must be at least 3, got {d}")
        if not 1 <= k < d:
            raise SceneError(f"Codimension must satisfy 1 <= k < d, got k={k}, d={d}")
        if len(self.metric) != d or any(len(row) != d for row in self.metric):
            raise SceneError(f"Metric must be a {d}x{d} array")
        if len(self.embedding) != d:
            raise SceneError(f"Embedding needs {d} components, got {len(self.embedding)}")
        if len(self.base_point) != d - k:
            raise SceneError(
                f"Base point needs {d - k} parameters, got {len(self.base_point)}"
            )
        if self.frame_seeds is not None:
            if len(self.frame_seeds) != k or any(len(s) != d for s in self.frame_seeds):
                raise SceneError(f"Frame seeds must be a {k}x{d} array")
        if self.jet_order < 1:
            raise JetOrderError(f"Jet order must be positive, got {self.jet_order}")

    @classmethod
    def from_sources(
        cls,
        metric: Sequence[Sequence[str]],
        embedding: Sequence[str],
        base_point: Sequence[float],
        frame_seeds: Optional[Sequence[Sequence[str]]] = None,
        conformal_factor: Optional[str] = None,
        jet_order: int = 6,
        name: str = "",
    ) -> "Scene":
        """Parse expression text into a scene (x-scope for the metric, u-scope for Λ)."""
        d = len(embedding)
        n = len(base_point)
        if not 1 <= n < d:
            raise SceneError(f"Base point needs between 1 and {d - 1} parameters, got {n}")
        used = _parameter_count(list(embedding) + [e for row in (frame_seeds or ()) for e in row])
        if used > n:
            raise SceneError(f"Embedding uses u{used - 1} but the base point has {n} parameters")
        x_scope = scope_names("x", d)
        u_scope = scope_names("u", n)
        seeds = None
        if frame_seeds is not None:
            seeds = tuple(
                tuple(parse_expression(str(e), u_scope) for e in row) for row in frame_seeds
            )
        scene = cls(
            dimension=d,
            codimension=d - n,
            metric=tuple(tuple(parse_expression(str(e), x_scope) for e in row) for row in metric),
            embedding=tuple(parse_expression(str(e), u_scope) for e in embedding),
            base_point=tuple(float(b) for b in base_point),
            frame_seeds=seeds,
            conformal_factor=(
                parse_expression(conformal_factor, x_scope) if conformal_factor else None
            ),
            jet_order=jet_order,
            name=name,
        )
        logger.info(f"Scene {name or '<unnamed>'}: d={d}, k={d - n}, jet order {jet_order}")
        return scene

    @property
    def tangent_dimension(self) -> int:
        return self.dimension - self.codimension

    @property
    def parameters(self) -> np.ndarray:
        return np.asarray(self.base_point, dtype=float)

    @property
    def point(self) -> np.ndarray:
        """x₀ = ι(u₀)."""
        return self.embedding_jet(0).value

    def embedding_jet(self, order: int) -> JetSeries:
        return evaluate_all(self.embedding, JetSeries.variables(self.parameters, order))

    def metric_at(self, inputs: JetSeries) -> JetSeries:
        """g_ab evaluated on a jet of points (x-, u- or (u, t)-jets alike)."""
        d = self.dimension
        flat = [entry for row in self.metric for entry in row]
        return evaluate_all(flat, inputs).reshape(d, d)

    def metric_jet(self, order: Optional[int] = None) -> MetricJet:
        order = self.jet_order if order is None else order
        inputs = JetSeries.variables(self.point, order)
        return MetricJet.from_jet(self.metric_at(inputs))

    def omega_at(self, inputs: JetSeries) -> JetSeries:
        if self.conformal_factor is None:
            return JetSeries.constant(1.0, inputs.space, inputs.base)
        omega = evaluate(self.conformal_factor, inputs)
        if omega.value <= 0:
            raise SceneError(f"Conformal factor must be positive, got {omega.value}")
        return omega

    def seed_jets(self, order: int) -> Optional[JetSeries]:
        if self.frame_seeds is None:
            return None
        inputs = JetSeries.variables(self.parameters, order)
        flat = [e for row in self.frame_seeds for e in row]
        return evaluate_all(flat, inputs).reshape(self.codimension, self.dimension)

    def bulk_curvature(self, order: Optional[int] = None, with_cotton: bool = True) -> CurvatureStack:
        return curvature_stack(self.metric_jet(order), with_cotton=with_cotton)

    def rescaled(self, omega: Optional[Expression] = None) -> "Scene":
        """The same embedding in the metric Ω²g (Ω defaults to the scene's conformal factor)."""
        omega = self.conformal_factor if omega is None else omega
        if omega is None:
            return self
        metric = tuple(
            tuple(
                Expression(
                    root=BinaryOp("*", entry.root, Power(omega.root, 2.0)),
                    scope=entry.scope,
                    source=f"({entry.source})*({omega.source})^2",
                )
                for entry in row
            )
            for row in self.metric
        )
        return replace(self, metric=metric, conformal_factor=None)

    def with_seeds(self, seeds: Sequence[Sequence[str]]) -> "Scene":
        u_scope = scope_names("u", self.tangent_dimension)
        parsed = tuple(tuple(parse_expression(str(e), u_scope) for e in row) for row in seeds)
        return replace(self, frame_seeds=parsed)


@dataclass(frozen=True)
class FrameField:
    """Orthonormal normal frame along Λ with the tangent data it was built from."""

    scene: Scene
    embedding: JetSeries
    tangents: JetSeries
    normals: JetSeries
    ambient_metric: JetSeries
    ambient_christoffel: JetSeries
    induced_metric: JetSeries
    induced_inverse: JetSeries

    @property
    def order(self) -> int:
        return self.normals.order

    @property
    def dimension(self) -> int:
        return self.scene.dimension

    @property
    def codimension(self) -> int:
        return self.scene.codimension

    @property
    def tangent_dimension(self) -> int:
        return self.scene.tangent_dimension

    @cached_property
    def lowered_normals(self) -> JetSeries:
        """n_bα, stored as [α, b]."""
        return jet_einsum("zc,cb->zb", self.normals, self.ambient_metric)

    @cached_property
    def projector(self) -> JetSeries:
        """ḡ^a_b = δ^a_b - n^a_α n_bα."""
        outer = jet_einsum("za,zb->ab", self.normals, self.lowered_normals)
        return np.eye(self.dimension) - outer

    @cached_property
    def adapted_basis(self) -> JetSeries:
        """Columns E_0..E_{n-1}, n_0..n_{k-1}."""
        return jets.concatenate([self.tangents, self.normals.transpose(1, 0)], axis=1)

    @cached_property
    def intrinsic_metric(self) -> MetricJet:
        return MetricJet.from_jet(self.induced_metric)

    @cached_property
    def intrinsic_christoffel(self) -> JetSeries:
        return christoffel(self.intrinsic_metric)

    @cached_property
    def intrinsic_riemann(self) -> JetSeries:
        """R̄_ijkl with all indices down."""
        metric = self.intrinsic_metric
        return lower_riemann(riemann_tensor(metric, self.intrinsic_christoffel), metric)

    def with_normals(self, normals: JetSeries) -> "FrameField":
        order = min(normals.order, self.order)
        return replace(self, normals=normals.truncate(order))

    def orthonormality_residual(self) -> float:
        gram = jet_einsum("za,ab,yb->zy", self.normals, self.ambient_metric, self.normals)
        cross = jet_einsum("za,ab,bi->zi", self.normals, self.ambient_metric, self.tangents)
        return max((gram - np.eye(self.codimension)).max_abs(), cross.max_abs())


def _inner(metric: JetSeries, v: JetSeries, w: JetSeries) -> JetSeries:
    return jet_einsum("ab,a,b->", metric, v, w)


def _project_off_tangent(v: JetSeries, tangents: JetSeries, metric: JetSeries, induced_inverse: JetSeries) -> JetSeries:
    along = jet_einsum("ai,ij,bj,bc,c->a", tangents, induced_inverse, tangents, metric, v)
    return v - along


def _gram_schmidt(candidates: Sequence[JetSeries], tangents: JetSeries, metric: JetSeries, induced_inverse: JetSeries, count: int, strict: bool) -> List[JetSeries]:
    scale = float(np.max(np.abs(metric.value)))
    normals: List[JetSeries] = []
    for position, v in enumerate(candidates):
        w = _project_off_tangent(v, tangents, metric, induced_inverse)
        for n in normals:
            w = w - n * _inner(metric, w, n)
        norm2 = _inner(metric, w, w)
        if float(norm2.value) <= RANK_TOL * scale:
            if strict:
                raise SceneError(
                    f"Frame seed {position} is dependent on the tangent space and earlier seeds"
                )
            continue
        normals.append(w / jets.sqrt(norm2))
        if len(normals) == count:
            break
    if len(normals) < count:
        raise SceneError(f"Could only build {len(normals)} of {count} normal vectors")
    return normals


def build_frame(scene: Scene, order: Optional[int] = None) -> FrameField:
    """Orthonormal normal frame to u-jet ``order`` (default N - 1) by Gram-Schmidt.

    Seeds are used in their given order; without seeds the coordinate axes are
    tried in turn and the first k that survive projection are kept.
    """
    order = scene.jet_order - 1 if order is None else order
    if order < 0:
        raise JetOrderError(f"Frame order must be non-negative, got {order}")
    d, k = scene.dimension, scene.codimension
    iota = scene.embedding_jet(order + 1)
    tangents = iota.gradient()
    metric = scene.metric_at(iota)
    gamma = christoffel(scene.metric_jet(order + 1)).compose(iota)

    induced = jet_einsum("ai,ab,bj->ij", tangents, metric, tangents)
    eigenvalues = np.linalg.eigvalsh(induced.value)
    if np.min(eigenvalues) <= RANK_TOL * max(1.0, float(np.max(np.abs(eigenvalues)))):
        raise SceneError(f"Embedding differential is rank deficient at u0: {eigenvalues}")
    induced_inverse = jet_inverse_matrix(induced)

    seeds = scene.seed_jets(order)
    if seeds is not None:
        candidates = [seeds[alpha] for alpha in range(k)]
        strict = True
    else:
        candidates = [JetSeries.constant(np.eye(d)[a], iota.space.lower(order), iota.base) for a in range(d)]
        strict = False
    normals = _gram_schmidt(candidates, tangents, metric, induced_inverse, k, strict)

    frame = FrameField(
        scene=scene,
        embedding=iota,
        tangents=tangents,
        normals=jets.stack(normals),
        ambient_metric=metric,
        ambient_christoffel=gamma,
        induced_metric=induced,
        induced_inverse=induced_inverse,
    )
    logger.debug(
        f"Built frame to order {frame.order}, orthonormality residual {frame.orthonormality_residual():.3e}"
    )
    return frame


def frame_components(tensor: JetSeries, frame: FrameField) -> JetSeries:
    """Components of a bulk tensor along Λ in the adapted basis (E_i, n_α), all slots down."""
    letters = "abcdefgh"[: tensor.ndim]
    targets = "ABCDEFGH"[: tensor.ndim]
    along = tensor.compose(frame.embedding) if tensor.nvars != frame.normals.nvars else tensor
    spec = letters + "," + ",".join(f"{a}{t}" for a, t in zip(letters, targets)) + "->" + targets
    return jet_einsum(spec, along, *([frame.adapted_basis] * tensor.ndim))


# extrinsic data -------------------------------------------------------------


@dataclass(frozen=True)
class ExtrinsicData:
    """II, H, II̊, β and ℛ along Λ as u-jets."""

    frame: FrameField
    normal_derivative: JetSeries
    second_fundamental_form: JetSeries
    mean_curvature: JetSeries
    trace_free: JetSeries
    normal_fundamental_form: JetSeries
    normal_curvature: Optional[JetSeries]

    def invariant_residuals(self) -> Dict[str, float]:
        II = self.second_fundamental_form
        trace = jet_einsum("ij,ijz->z", self.frame.induced_inverse, self.trace_free)
        beta = self.normal_fundamental_form
        return {
            "II symmetry": (II - II.transpose(1, 0, 2)).max_abs(),
            "II̊ trace": trace.max_abs(),
            "β antisymmetry": (beta + beta.transpose(0, 2, 1)).max_abs(),
        }


def normal_curvature_from_beta(beta: JetSeries) -> JetSeries:
    """ℛ_ijαβ = ∂_iβ_jαβ - ∂_jβ_iαβ + β_iαγβ_jγβ - β_jαγβ_iγβ."""
    d_beta = beta.gradient().transpose(3, 0, 1, 2)
    quadratic = jet_einsum("izw,jwy->ijzy", beta, beta)
    return d_beta - d_beta.transpose(1, 0, 2, 3) + quadratic - quadratic.transpose(1, 0, 2, 3)


def extrinsic_data(frame: FrameField) -> ExtrinsicData:
    if frame.order < 1:
        raise JetOrderError("Extrinsic data needs a frame of order >= 1")
    normals = frame.normals
    Dn = normals.gradient() + jet_einsum(
        "abc,bi,zc->zai", frame.ambient_christoffel, frame.tangents, normals
    )
    II = jet_einsum("zai,ab,bj->ijz", Dn, frame.ambient_metric, frame.tangents)
    beta = jet_einsum("za,ab,ybi->izy", normals, frame.ambient_metric, Dn)
    n = frame.tangent_dimension
    H = jet_einsum("ij,ijz->z", frame.induced_inverse, II) * (1.0 / n)
    trace_free = II - jet_einsum("ij,z->ijz", frame.induced_metric, H)
    curvature = normal_curvature_from_beta(beta) if beta.order >= 1 else None
    return ExtrinsicData(
        frame=frame,
        normal_derivative=Dn,
        second_fundamental_form=II,
        mean_curvature=H,
        trace_free=trace_free,
        normal_fundamental_form=beta,
        normal_curvature=curvature,
    )


def intrinsic_covariant_derivative(
    tensor: JetSeries,
    frame: FrameField,
    lower: Sequence[int] = (),
    upper: Sequence[int] = (),
) -> JetSeries:
    """∇̄ acting on the listed tangent axes; Greek axes are labels. Derivative index last."""
    return covariant_derivative(tensor, frame.intrinsic_christoffel, lower=lower, upper=upper)


def normal_covariant_derivative(section: JetSeries, beta: JetSeries) -> JetSeries:
    """D_i v_α = ∂_i v_α + β_iαβ v_β for a section of shape (k,) or (k, ...) ; index i last."""
    rest = "pqrs"[: section.ndim - 1]
    coupling = jet_einsum(f"izy,y{rest}->z{rest}i", beta, section)
    return section.gradient() + coupling


def normal_curvature_commutator_residual(data: ExtrinsicData, section: Optional[JetSeries] = None) -> float:
    """|[D_i, D_j] v - ℛ_ij v| for a test section v of the normal bundle."""
    beta = data.normal_fundamental_form
    if data.normal_curvature is None:
        raise JetOrderError("Normal curvature needs β to jet order >= 1")
    k = data.frame.codimension
    if section is None:
        u = JetSeries.variables(data.frame.scene.parameters, beta.order + 1)
        offset = u - data.frame.scene.parameters
        weights = np.outer(np.arange(1, k + 1), np.arange(1, u.shape[0] + 1)) * 0.3
        section = jets.exp(jet_einsum("zi,i->z", weights, offset)) + np.arange(k)
    first = normal_covariant_derivative(section, beta)
    second = normal_covariant_derivative(first, beta)  # second[α, j, i] = D_i D_j v_α
    commutator = second.transpose(0, 2, 1) - second
    expected = jet_einsum("ijzy,y->zij", data.normal_curvature, section)
    return (commutator - expected).max_abs()


# gauge action ---------------------------------------------------------------


def gauge_transformed_beta(beta: JetSeries, gauge: JetSeries) -> JetSeries:
    """β̃_i = m β_i mᵀ + m ∂_i mᵀ for ñ_α = m_αβ n_β."""
    conjugated = jet_einsum("zw,iwv,yv->izy", gauge, beta, gauge)
    inhomogeneous = jet_einsum("zw,ywi->izy", gauge, gauge.gradient())
    return conjugated + inhomogeneous


def apply_gauge(frame: FrameField, gauge: JetSeries) -> FrameField:
    """New frame ñ_α = m_αβ(u) n_β for a field of orthogonal k×k matrices."""
    k = frame.codimension
    if gauge.shape != (k, k):
        raise SceneError(f"Gauge must be {k}x{k}, got {gauge.shape}")
    defect = (jet_einsum("zw,yw->zy", gauge, gauge) - np.eye(k)).max_abs()
    if defect > ORTHOGONALITY_TOL:
        raise SceneError(f"Gauge field is not orthogonal (defect {defect:.3e})")
    return frame.with_normals(jet_einsum("zw,wa->za", gauge, frame.normals))


def rotation_gauge(theta: JetSeries) -> JetSeries:
    """k = 2 rotation by θ(u); shifts β_i,01 by ∂_iθ."""
    c, s = jets.cos(theta), jets.sin(theta)
    return jets.stack([jets.stack([c, -s]), jets.stack([s, c])])


def _require_curve(frame: FrameField, what: str) -> None:
    if frame.tangent_dimension != 1:
        raise DimensionError(f"{what} is only implemented for curves, got dim Λ = {frame.tangent_dimension}")


def _picard(rhs, start: np.ndarray, order: int, template: JetSeries) -> JetSeries:
    """Solve m' = rhs(m), m(u0) = start, in one variable by Picard iteration."""
    m = JetSeries.constant(start, template.space.lower(0), template.base)
    for _ in range(order + 1):
        integrand = rhs(m)
        m = integrand.antiderivative(0) + start
        m = m.truncate(min(m.order, order))
    return m


def rotation_minimizing_gauge(frame: FrameField) -> JetSeries:
    """m with m' = m β_u, m(u0) = I, so that the gauged frame has β ≡ 0."""
    _require_curve(frame, "Rotation minimizing frame")
    beta_u = extrinsic_data(frame).normal_fundamental_form[0]
    k = frame.codimension
    return _picard(lambda m: jet_einsum("zw,wy->zy", m, beta_u), np.eye(k), beta_u.order + 1, beta_u)


def rotation_minimizing_frame(frame: FrameField) -> FrameField:
    rotated = apply_gauge(frame, rotation_minimizing_gauge(frame))
    logger.info(f"Rotation minimizing frame built to order {rotated.order}")
    return rotated


def coulomb_gauge(frame: FrameField) -> JetSeries:
    """Gauge field making β_u / |ι'| constant along a curve.

    Solves m' = m β_u - s' B m with B = β_u(u0) / s'(u0) and s' = |ι'|_g.
    """
    _require_curve(frame, "Coulomb gauge")
    beta_u = extrinsic_data(frame).normal_fundamental_form[0]
    speed = jets.sqrt(frame.induced_metric[0, 0]).truncate(beta_u.order)
    B = beta_u.value / float(speed.value)

    def rhs(m: JetSeries) -> JetSeries:
        return jet_einsum("zw,wy->zy", m, beta_u) - speed * jet_einsum("zw,wy->zy", B, m)

    return _picard(rhs, np.eye(frame.codimension), beta_u.order + 1, beta_u)


def _cross(a: JetSeries, b: JetSeries) -> JetSeries:
    return jets.stack(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def frenet_frame(scene: Scene, order: Optional[int] = None) -> FrameField:
    """Normal frame (N, B) of a curve in flat R³."""
    if scene.dimension != 3 or scene.tangent_dimension != 1:
        raise DimensionError("Frenet frames are defined here for curves in R^3 only")
    order = scene.jet_order - 1 if order is None else order
    if (scene.metric_jet(order + 2).metric - np.eye(3)).max_abs() > 1e-12:
        raise SceneError("Frenet frame needs the flat Euclidean metric")
    base = build_frame(replace(scene, frame_seeds=None), order)
    iota = scene.embedding_jet(order + 2)
    velocity = iota.derivative(0)
    T = velocity / jets.sqrt(jet_einsum("a,a->", velocity, velocity))
    dT = T.derivative(0)
    N = dT / jets.sqrt(jet_einsum("a,a->", dT, dT))
    B = _cross(T.truncate(N.order), N)
    return base.with_normals(jets.stack([N, B]))


def frenet_torsion(data: ExtrinsicData) -> float:
    """Torsion τ = β_u,BN / |ι'|_g at u0."""
    speed = np.sqrt(float(data.frame.induced_metric.value[0, 0]))
    return float(data.normal_fundamental_form.value[0, 1, 0]) / speed


# classical identities -------------------------------------------------------


@dataclass
class IdentityReport:
    """Max-norm residual per identity, plus notes on skipped checks."""

    residuals: Dict[str, float] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def passed(self, tolerance: float) -> bool:
        return all(value < tolerance for value in self.residuals.values())


def _square(trace_free: JetSeries, induced_inverse: JetSeries) -> JetSeries:
    """II̊²_ijαβ = II̊_ipα ḡ^pq II̊_qjβ."""
    return jet_einsum("ipz,pq,qjy->ijzy", trace_free, induced_inverse, trace_free)


def classical_identity_residuals(
    frame: FrameField,
    data: Optional[ExtrinsicData] = None,
    stack: Optional[CurvatureStack] = None,
) -> IdentityReport:
    """Gauss, Codazzi-Mainardi, Ricci and the Fialkow-Gauss family along Λ."""
    data = extrinsic_data(frame) if data is None else data
    stack = frame.scene.bulk_curvature(with_cotton=False) if stack is None else stack
    n, k = frame.tangent_dimension, frame.codimension
    t, v = slice(0, n), slice(n, n + k)
    report = IdentityReport()

    ginv = frame.induced_inverse
    gbar = frame.induced_metric
    II = data.second_fundamental_form
    TF = data.trace_free
    H = data.mean_curvature
    beta = data.normal_fundamental_form

    R = frame_components(stack.riemann_lower, frame)
    P = frame_components(stack.schouten, frame)
    W = frame_components(stack.weyl, frame)
    J = stack.J.compose(frame.embedding)

    quadratic = jet_einsum("ilz,jkz->ijkl", II, II)
    gauss = R[t, t, t, t] - frame.intrinsic_riemann - quadratic + quadratic.transpose(1, 0, 2, 3)
    report.residuals["Gauss equation"] = gauss.max_abs()

    dII = intrinsic_covariant_derivative(II, frame, lower=(0, 1)).transpose(3, 0, 1, 2)
    twist = jet_einsum("jyz,iky->ijkz", beta, II)
    codazzi = R[t, t, t, v] - (dII - dII.transpose(1, 0, 2, 3) + twist - twist.transpose(1, 0, 2, 3))
    report.residuals["Codazzi-Mainardi equation"] = codazzi.max_abs()

    if data.normal_curvature is not None:
        cross = jet_einsum("ipy,pq,jqz->ijzy", II, ginv, II)
        ricci = R[t, t, v, v] - (data.normal_curvature + cross - cross.transpose(1, 0, 2, 3))
        report.residuals["Ricci equation"] = ricci.max_abs()

    if n < 2:
        report.notes.append("Fialkow-Gauss family skipped: dim Λ = 1")
        return report

    square = _square(TF, ginv)
    square_trace = jet_einsum("jlzz->jl", square)
    square_scalar = jet_einsum("jl,jl->", ginv, square_trace)
    W_normal_scalar = jet_einsum("zyyz->", W[v, v, v, v])
    intrinsic_ricci = jet_einsum("ij,ikjl->kl", ginv, frame.intrinsic_riemann)
    intrinsic_scalar = jet_einsum("kl,kl->", ginv, intrinsic_ricci)
    intrinsic_J = intrinsic_scalar * (1.0 / (2 * (n - 1)))
    H2 = jet_einsum("z,z->", H, H)

    lhs = (
        P[t, t] + jet_einsum("z,jlz->jl", H, TF) + gbar * (H2 * 0.5)
    ) * float(n - 2) - (intrinsic_ricci - gbar * intrinsic_J)
    rhs = (
        square_trace
        - jet_einsum("zjlz->jl", W[v, t, t, v])
        - gbar * ((square_scalar + W_normal_scalar) * (1.0 / (2 * (n - 1))))
    )
    report.residuals["Fialkow-Gauss equation"] = (lhs - rhs).max_abs()

    if n > 2:
        W_mixed = jet_einsum("cd,zcdz->", ginv, W[v, t, t, v])
        lhs = J - jet_einsum("zz->", P[v, v])
        rhs = intrinsic_J - H2 * (n / 2.0) + (square_scalar - W_mixed) * (1.0 / (2 * (n - 1)))
        report.residuals["theorema egregium"] = (lhs - rhs).max_abs()
    else:
        report.notes.append("theorema egregium skipped: needs dim Λ > 2")

    dTF = intrinsic_covariant_derivative(TF, frame, lower=(0, 1)).transpose(3, 0, 1, 2)
    divergence = jet_einsum("ik,ikjz->jz", ginv, dTF)  # ∇̄^k II̊_kjα
    dH = H.gradient().transpose(1, 0)
    beta_up = jet_einsum("kl,lzy->kzy", ginv, beta)
    lhs = P[t, v] * float(n - 1)
    rhs = (
        divergence
        - (dH + jet_einsum("jzy,y->jz", beta, H)) * float(n - 1)
        + jet_einsum("jky,kzy->jz", TF, beta_up)
        + jet_einsum("yzyj->jz", W[v, v, v, t])
    )
    report.residuals["traced Codazzi equation"] = (lhs - rhs).max_abs()

    W_trace = jet_einsum("yjyz->jz", W[v, t, v, v])
    lhs = W[t, t, t, v] + (
        jet_einsum("ik,jz->ijkz", gbar, W_trace) - jet_einsum("jk,iz->ijkz", gbar, W_trace)
    ) * (1.0 / (n - 1))
    curl = dTF - dTF.transpose(1, 0, 2, 3)
    twist = jet_einsum("izy,jky->ijkz", beta, TF)
    mixed = divergence + jet_einsum("jcy,czy->jz", TF, beta_up)
    trace_part = jet_einsum("ki,jz->ijkz", gbar, mixed) - jet_einsum("kj,iz->ijkz", gbar, mixed)
    rhs = curl + twist - twist.transpose(1, 0, 2, 3) - trace_part * (1.0 / (n - 1))
    report.residuals["trace-free Codazzi equation"] = (lhs - rhs).max_abs()

    worst = max(report.residuals.values())
    logger.info(f"Classical identities: {len(report.residuals)} checked, worst residual {worst:.3e}")
    return report
