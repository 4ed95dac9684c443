"""
Data models for scene files, configuration and verification reports.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, computed_field, field_validator, model_validator

from .exceptions import SceneError
from .jets import JetSeries
from .submanifold import Scene

JET_ORDER_ENV = "EXHOL_JET_ORDER"
SYMMETRY_TOL = 1e-10

Entry = Union[str, float, int]


class ExholConfig(BaseModel):
    """Jet order and the tolerance hierarchy used by every check."""

    jet_order: int = Field(default=6, description="Truncation order of bulk jets")
    max_order: int = Field(
        default=4, description="Highest defining-map order corrected by default"
    )
    structural_tol: float = Field(
        default=1e-9, description="Orthonormality, symmetry and exactness checks"
    )
    projector_tol: float = Field(default=1e-12, description="Projector algebra")
    derived_tol: float = Field(
        default=1e-6, description="Obstructions against closed-form formulas"
    )
    identity_tol: float = Field(default=1e-7, description="Classical identities")
    holographic_tol: float = Field(
        default=1e-5, description="Holographic against explicit Willmore values"
    )

    @field_validator("jet_order", "max_order")
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError("Value must be a positive integer")
        return v

    @field_validator(
        "structural_tol", "projector_tol", "derived_tol", "identity_tol", "holographic_tol"
    )
    @classmethod
    def validate_tolerance(cls, v):
        if v <= 0.0:
            raise ValueError("Tolerances must be positive")
        return v

    @classmethod
    def from_env(cls, environ: Optional[Mapping[str, str]] = None, **overrides) -> "ExholConfig":
        """Defaults, then EXHOL_JET_ORDER, then explicit overrides."""
        environ = os.environ if environ is None else environ
        values: Dict[str, Any] = {}
        raw = environ.get(JET_ORDER_ENV)
        if raw is not None and raw.strip():
            values["jet_order"] = raw.strip()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class SceneFile(BaseModel):
    """JSON scene document: bulk metric, embedding, optional seeds and conformal factor."""

    dimension: int = Field(..., description="Bulk dimension d")
    codimension: int = Field(..., description="Codimension k of Λ")
    metric: List[List[str]] = Field(..., description="d x d metric entries in x0..x{d-1}")
    embedding: List[str] = Field(..., description="d embedding entries in u0..u{d-k-1}")
    base_point: List[float] = Field(..., description="Base parameter u0 (d - k reals)")
    frame_seeds: Optional[List[List[str]]] = Field(
        default=None, description="k x d normal frame seeds in u"
    )
    conformal_factor: Optional[str] = Field(
        default=None, description="Positive function Ω of x for rescaling probes"
    )
    jet_order: int = Field(default=6, description="Jet truncation order")
    name: str = Field(default="", description="Scene label")

    @field_validator("metric", "frame_seeds", mode="before")
    @classmethod
    def validate_entry_rows(cls, v):
        if v is None:
            return v
        return [[str(entry) for entry in row] for row in v]

    @field_validator("embedding", mode="before")
    @classmethod
    def validate_entries(cls, v):
        return [str(entry) for entry in v]

    @field_validator("conformal_factor", mode="before")
    @classmethod
    def validate_factor(cls, v):
        return None if v is None else str(v)

    @field_validator("dimension")
    @classmethod
    def validate_dimension(cls, v):
        if v < 3:
            raise ValueError("Bulk dimension must be at least 3")
        return v

    @field_validator("jet_order")
    @classmethod
    def validate_jet_order(cls, v):
        if v < 1:
            raise ValueError("Jet order must be positive")
        return v

    @model_validator(mode="after")
    def validate_shapes(self):
        d, k = self.dimension, self.codimension
        if not 1 <= k < d:
            raise ValueError(f"Codimension must satisfy 1 <= k < d, got k={k}, d={d}")
        if len(self.metric) != d or any(len(row) != d for row in self.metric):
            raise ValueError(f"Metric must be a {d}x{d} array")
        if len(self.embedding) != d:
            raise ValueError(f"Embedding needs {d} entries, got {len(self.embedding)}")
        if len(self.base_point) != d - k:
            raise ValueError(f"Base point needs {d - k} entries, got {len(self.base_point)}")
        if self.frame_seeds is not None:
            if len(self.frame_seeds) != k or any(len(row) != d for row in self.frame_seeds):
                raise ValueError(f"Frame seeds must be a {k}x{d} array")
        return self

    @classmethod
    def from_path(cls, path: Union[str, Path]) -> "SceneFile":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    @property
    def text_symmetric(self) -> bool:
        """Check if the metric entries are symmetric as written."""
        d = self.dimension
        return all(
            self.metric[i][j].replace(" ", "") == self.metric[j][i].replace(" ", "")
            for i in range(d)
            for j in range(i)
        )

    def to_scene(self, jet_order: Optional[int] = None) -> Scene:
        """Parse into a Scene; a text-asymmetric metric must be symmetric at the base point."""
        scene = Scene.from_sources(
            metric=self.metric,
            embedding=self.embedding,
            base_point=self.base_point,
            frame_seeds=self.frame_seeds,
            conformal_factor=self.conformal_factor,
            jet_order=self.jet_order if jet_order is None else jet_order,
            name=self.name,
        )
        if not self.text_symmetric:
            value = scene.metric_at(JetSeries.variables(scene.point, 0)).value
            asymmetry = float(np.max(np.abs(value - value.T)))
            if asymmetry > SYMMETRY_TOL:
                raise SceneError(f"Metric is not symmetric at the base point ({asymmetry:.3e})")
        return scene


class CheckResult(BaseModel):
    """One numeric check: a residual compared against its tolerance."""

    name: str
    value: float
    tolerance: float
    anchor: str = Field(default="", description="Identity or formula being verified")

    @computed_field
    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value)) and abs(self.value) < self.tolerance


class ObstructionReport(BaseModel):
    """An obstruction tensor on Λ flattened with its index metadata."""

    name: str
    order: int
    shape: List[int]
    indices: List[List[int]]
    values: List[float]

    @classmethod
    def from_array(cls, name: str, order: int, array: np.ndarray) -> "ObstructionReport":
        array = np.asarray(array, dtype=float)
        indices = [list(index) for index in np.ndindex(*array.shape)]
        return cls(
            name=name,
            order=order,
            shape=list(array.shape),
            indices=indices,
            values=[float(v) for v in array.reshape(-1)],
        )

    def to_array(self) -> np.ndarray:
        return np.asarray(self.values).reshape(self.shape)

    def rows(self) -> List[Tuple[str, str, float]]:
        """(name, index label, value) rows for CSV tables."""
        return [
            (self.name, "".join(str(i + 1) for i in index) or "-", value)
            for index, value in zip(self.indices, self.values)
        ]


class WillmoreReport(BaseModel):
    """Per-normal contributions to the order-3 Willmore trace of a surface, weight -3."""

    L_term: List[float] = Field(..., description="L_ab II̊^ab_α")
    weyl_term: List[float] = Field(..., description="II̊^bc_α ḡ^ad W_abcd")
    cubic_term: List[float] = Field(..., description="II̊^ab_γ II̊_b^c_γ II̊_acα")
    iv: List[float] = Field(..., description="IV_α")
    beta_derivative: List[float] = Field(
        ..., description="II̊^ab_γ ∇̄_a β_bαγ + 2 β_bαγ ∇̄_a II̊^ab_γ"
    )
    beta_quadratic_trace: List[float] = Field(..., description="II̊^ab_α β_aβγ β_bβγ")
    beta_quadratic_mixed: List[float] = Field(..., description="II̊^ab_γ β_aαβ β_bβγ")
    beta_weyl_mixed: List[float] = Field(..., description="W_αβγa β^a_βγ")
    beta_weyl_trace: List[float] = Field(..., description="W_βγγa β^a_αβ")
    total: List[float] = Field(..., description="F⁽³⁾_αγγρρ from the full formula")
    simplified: List[float] = Field(
        ..., description="Total with the cubic term dropped (2x2 Cayley-Hamilton)"
    )
    comparison: List[float] = Field(..., description="-L_ab II̊^ab_α + IV_α")
    beta_invariant: List[float] = Field(
        ..., description="II̊^ab_γ ∇̄_a β_bαγ + 2/(d-k-1) β_bαγ ∇̄_a II̊^ab_γ"
    )
    weight: int = -3
    normalization: str = ""

    def covariant_fields(self) -> Dict[str, np.ndarray]:
        """Fields that rescale as weight -3 densities."""
        names = ("L_term", "weyl_term", "cubic_term", "iv", "total", "comparison")
        return {name: np.asarray(getattr(self, name)) for name in names}


class ExtensionResult(BaseModel):
    """Extended jet f̃ with the residual of every constraint it was built to satisfy."""

    mode: str
    order: int
    weight: Optional[float] = None
    extended: JetSeries = Field(..., exclude=True)
    partial_sums: List[JetSeries] = Field(default_factory=list, exclude=True)
    residuals: Dict[str, float] = Field(default_factory=dict)
    obstruction: Optional[List[float]] = None
    solved_order: int = Field(default=0, description="Highest order whose constraints hold")
    notes: List[str] = Field(default_factory=list)

    model_config = {"arbitrary_types_allowed": True}

    @property
    def obstructed(self) -> bool:
        return self.obstruction is not None and any(abs(v) > 0.0 for v in self.obstruction)


class Report(BaseModel):
    """Machine-readable result of one CLI command."""

    command: str
    scene: str = ""
    scene_hash: str = ""
    checks: List[CheckResult] = Field(default_factory=list)
    obstructions: List[ObstructionReport] = Field(default_factory=list)
    details: Dict[str, Any] = Field(default_factory=dict)
    timing: float = 0.0

    @computed_field
    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def add_check(self, name: str, value: float, tolerance: float, anchor: str = "") -> CheckResult:
        check = CheckResult(name=name, value=float(value), tolerance=tolerance, anchor=anchor)
        self.checks.append(check)
        return check

    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)
