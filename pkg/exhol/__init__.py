"""
exhol - jet-level holography for submanifolds of higher codimension

Builds defining maps and defining densities for a submanifold Λ order by order,
extracts the obstructions to their unit normalization, evaluates the surface
Willmore invariant and solves the extension problems off Λ.
"""

from .conformal import ConformalDefiningState, construct_conformal, extract_willmore_holographic
from .defining_map import DefiningMapState, build_initial, construct
from .exceptions import (
    DimensionError,
    ExcludedWeightError,
    ExholError,
    ExpressionSyntaxError,
    IndexKindError,
    JetDomainError,
    JetOrderError,
    SceneError,
    SingularJacobianError,
    UnknownFunctionError,
    UnknownIdentifierError,
)
from .extension import conformal_extension, restricted_extension, symmetric_extension
from .jets import JetSeries, JetSpace, jet_einsum
from .models import (
    CheckResult,
    ExholConfig,
    ExtensionResult,
    ObstructionReport,
    Report,
    SceneFile,
    WillmoreReport,
)
from .submanifold import FrameField, Scene, build_frame, extrinsic_data
from .tractors import TractorCalculus
from .willmore import classical_willmore, iv_invariant, willmore_explicit

__version__ = "0.1.0"
__all__ = [
    "CheckResult",
    "ConformalDefiningState",
    "DefiningMapState",
    "DimensionError",
    "ExcludedWeightError",
    "ExholConfig",
    "ExholError",
    "ExpressionSyntaxError",
    "ExtensionResult",
    "FrameField",
    "IndexKindError",
    "JetDomainError",
    "JetOrderError",
    "JetSeries",
    "JetSpace",
    "ObstructionReport",
    "Report",
    "Scene",
    "SceneError",
    "SceneFile",
    "SingularJacobianError",
    "TractorCalculus",
    "UnknownFunctionError",
    "UnknownIdentifierError",
    "WillmoreReport",
    "build_frame",
    "build_initial",
    "classical_willmore",
    "conformal_extension",
    "construct",
    "construct_conformal",
    "extract_willmore_holographic",
    "extrinsic_data",
    "iv_invariant",
    "jet_einsum",
    "restricted_extension",
    "symmetric_extension",
    "willmore_explicit",
]
