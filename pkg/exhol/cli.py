"""
Command-line entry point: load a scene, run one pipeline, print a JSON report.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on input errors.
"""

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from time import time
from typing import Callable, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from . import jets
from .conformal import (
    antisymmetric_trace,
    build_conformal,
    conformal_correct_order1,
    construct_conformal,
    extract_willmore_holographic,
    p2_principal_symbol_residual,
    representative_probe,
    rescaling_residual,
    scale_independence_residual,
    scale_tractor_residual,
    willmore_trace,
)
from .curvature import (
    bianchi_residual,
    christoffel,
    cotton_divergence_residual,
    metric_compatibility_residual,
    weyl_trace_residual,
)
from .defining_map import construct, gradient_frame_residuals, gram_residual, verify_F2_formula
from .exceptions import ExholError
from .extension import conformal_extension, restricted_extension, symmetric_extension
from .jets import JetSeries
from .models import JET_ORDER_ENV, ExholConfig, ObstructionReport, Report, SceneFile
from .submanifold import (
    Scene,
    apply_gauge,
    build_frame,
    classical_identity_residuals,
    coulomb_gauge,
    extrinsic_data,
    normal_curvature_commutator_residual,
    rotation_minimizing_frame,
)
from .tensors import project_pistol31, project_symmetric, project_window22, projector_matrix
from .tractors import TractorCalculus, TractorField
from .utils.serialization import scene_hash, write_csv
from .willmore import (
    NORMALIZATION,
    classical_willmore,
    conformal_covariance_check,
    hypersurface_willmore,
    willmore_explicit,
)

logger = logging.getLogger(__name__)

COMMANDS = ("verify", "invariants", "defining-map", "obstructions", "willmore", "extend", "rmf")
DERIVED_CHECKS = ("formula", "determinant", "antisymmetric")


@dataclass
class ExholRunner:
    """Runs one command on one scene and collects the checks into a Report."""

    config: ExholConfig
    scene_file: SceneFile
    jet_order: Optional[int] = None
    scene: Scene = field(init=False)

    def __post_init__(self):
        self.scene = self.scene_file.to_scene(jet_order=self.jet_order)
        logger.info(
            f"Loaded scene {self.scene.name or '<unnamed>'}: d={self.scene.dimension}, "
            f"k={self.scene.codimension}, jet order {self.scene.jet_order}"
        )

    def new_report(self, command: str) -> Report:
        return Report(command=command, scene=self.scene.name, scene_hash=scene_hash(self.scene_file))

    def run(self, command: str, args: argparse.Namespace) -> Report:
        handlers: Dict[str, Callable[[Report, argparse.Namespace], None]] = {
            "verify": self.verify,
            "invariants": self.invariants,
            "defining-map": self.defining_map,
            "obstructions": self.obstructions,
            "willmore": self.willmore,
            "extend": self.extend,
            "rmf": self.rmf,
        }
        if command not in handlers:
            raise ExholError(f"Unknown command: {command}")
        start_time = time()
        report = self.new_report(command)
        handlers[command](report, args)
        report.timing = time() - start_time
        for failure in report.failures():
            logger.warning(
                f"Check failed: {failure.name} = {failure.value:.3e} "
                f"(tolerance {failure.tolerance:.1e}, {failure.anchor})"
            )
        return report

    def _state_checks(self, report: Report, checks: Dict[str, float], prefix: str = "") -> None:
        for name, value in sorted(checks.items()):
            derived = any(word in name for word in DERIVED_CHECKS)
            tolerance = self.config.derived_tol if derived else self.config.structural_tol
            report.add_check(f"{prefix}{name}", value, tolerance, anchor=name)

    def default_order(self, conformal: bool) -> int:
        """max_order, capped by the jet order and, for densities, by the implemented order 3."""
        cap = self.scene.jet_order - 3
        if conformal:
            cap = min(cap, 3)
        order = min(self.config.max_order, cap)
        if order < self.config.max_order:
            logger.info(f"Correcting to order {order} (jet order {self.scene.jet_order})")
        return max(order, 1)

    # commands -------------------------------------------------------------

    def verify(self, report: Report, args: argparse.Namespace) -> None:
        """Classical identities, curvature identities, projector algebra and tractor identities."""
        cfg = self.config
        frame = build_frame(self.scene)
        stack = self.scene.bulk_curvature()
        report.add_check("frame orthonormality", frame.orthonormality_residual(), cfg.structural_tol, "orthonormal frame")
        identities = classical_identity_residuals(frame, stack=stack)
        for name, value in sorted(identities.residuals.items()):
            report.add_check(name, value, cfg.identity_tol, anchor=name)
        report.details["notes"] = identities.notes

        metric = self.scene.metric_jet()
        report.add_check(
            "metric compatibility", metric_compatibility_residual(metric, christoffel(metric)),
            cfg.structural_tol, "Levi-Civita connection",
        )
        report.add_check("Bianchi identity", bianchi_residual(stack), cfg.structural_tol, "first Bianchi identity")
        report.add_check("Weyl trace", weyl_trace_residual(stack), cfg.structural_tol, "trace-free Weyl tensor")
        if stack.cotton is not None:
            report.add_check(
                "Cotton divergence", cotton_divergence_residual(stack), cfg.identity_tol, "contracted Bianchi identity"
            )

        k = self.scene.codimension
        for name, projector in (("window", project_window22), ("pistol", project_pistol31)):
            P = projector_matrix(projector, k)
            S = projector_matrix(project_symmetric, k)
            report.add_check(f"{name} projector idempotent", float(np.max(np.abs(P @ P - P))), cfg.projector_tol, "Young projector")
            report.add_check(f"{name} projector kills symmetric", float(np.max(np.abs(P @ S))), cfg.projector_tol, "Young projector")

        calculus = TractorCalculus(metric)
        probe = JetSeries.variables(self.scene.point, metric.order)
        density = probe[0] * probe[-1] + 1.0
        report.add_check(
            "double Thomas-D", calculus.double_d_residual(density, 1.0), 10 * cfg.structural_tol, "D∘D = 0"
        )
        tractor = calculus.thomas_d(density, 1.0)
        report.add_check(
            "tractor metric compatibility",
            calculus.metric_compatibility_residual(tractor, calculus.canonical()),
            cfg.structural_tol,
            "∇h = 0",
        )
        if self.scene.conformal_factor is not None:
            omega = self.scene.omega_at(JetSeries.variables(self.scene.point, metric.order))
            field_ = TractorField(tractor, 0.0)
            back = field_.rescale(omega, metric.inverse).rescale(
                1.0 / omega, metric.rescaled(omega).inverse
            )
            report.add_check(
                "splitting change round trip", (back.components - tractor).max_abs(), cfg.projector_tol, "change of splitting"
            )
        state = conformal_correct_order1(build_conformal(self.scene, frame))
        report.add_check("scale tractors on Λ", scale_tractor_residual(state), 10 * cfg.structural_tol, "N = (0, n, -H)")

    def invariants(self, report: Report, args: argparse.Namespace) -> None:
        """II, H, II̊, β, ℛ and the bulk curvature stack at the base point."""
        cfg = self.config
        frame = build_frame(self.scene)
        data = extrinsic_data(frame)
        stack = self.scene.bulk_curvature()
        for name, value in sorted(data.invariant_residuals().items()):
            report.add_check(name, value, cfg.structural_tol, anchor=name)
        if data.normal_curvature is not None:
            report.add_check(
                "normal curvature commutator", normal_curvature_commutator_residual(data), cfg.identity_tol, "[D, D] = ℛ"
            )
        values = {
            "second_fundamental_form": data.second_fundamental_form,
            "mean_curvature": data.mean_curvature,
            "trace_free": data.trace_free,
            "normal_fundamental_form": data.normal_fundamental_form,
        }
        if data.normal_curvature is not None:
            values["normal_curvature"] = data.normal_curvature
        report.obstructions.extend(ObstructionReport.from_array(name, 0, jet.value) for name, jet in values.items())
        report.details["induced_metric"] = frame.induced_metric.value.tolist()
        report.details["normals"] = frame.normals.value.tolist()
        report.details["J"] = float(stack.J.value)
        report.details["schouten"] = stack.schouten.value.tolist()
        report.details["weyl_norm"] = float(np.max(np.abs(stack.weyl.value)))

    def defining_map(self, report: Report, args: argparse.Namespace) -> None:
        """Construct the (conformal) defining map to the requested order."""
        order = args.order if args.order is not None else self.default_order(args.conformal)
        if args.conformal:
            state = construct_conformal(self.scene, order)
            report.details["equivalence_directions"] = len(state.equivalence_directions)
            report.details["third_order_choice_applied"] = state.third_order_choice_applied
            if order >= 1:
                report.add_check(
                    "P2 principal symbol", p2_principal_symbol_residual(state), self.config.derived_tol, "-kΔ^⊤"
                )
            if self.scene.conformal_factor is not None:
                omega = self.scene.omega_at(JetSeries.variables(self.scene.point, state.order))
                report.add_check(
                    "conformal Gram rescaling", rescaling_residual(state, omega),
                    10 * self.config.structural_tol, "weight 0 Gram matrix",
                )
        else:
            state = construct(self.scene, order)
            report.add_check("Gram residual", gram_residual(state), self.config.structural_tol, "G = δ + O(s^(m+1))")
            if order >= 1:
                for name, value in sorted(gradient_frame_residuals(state).items()):
                    report.add_check(name, value, self.config.structural_tol, anchor=name)
        self._state_checks(report, state.checks)
        for m, obstruction in sorted(state.obstructions.items()):
            report.obstructions.append(ObstructionReport.from_array(f"F{m}", m, obstruction.value))
        report.details["corrected_to"] = state.corrected_to
        report.details["conformal"] = bool(args.conformal)
        report.details["ranks"] = {str(m): removal.rank for m, removal in sorted(state.removals.items())}

    def obstructions(self, report: Report, args: argparse.Namespace) -> None:
        """F⁽²⁾ in both settings against the closed forms, and the Willmore trace where defined."""
        cfg = self.config
        state = construct(self.scene, 2)
        report.add_check("order-2 obstruction formula", verify_F2_formula(state), cfg.derived_tol, "order-2 obstruction")
        report.obstructions.append(ObstructionReport.from_array("F2", 2, state.obstructions[2].value))

        surface = self.scene.tangent_dimension == 2 and self.scene.codimension == self.scene.dimension - 2
        conformal = construct_conformal(self.scene, 3 if surface else 2)
        self._state_checks(report, conformal.checks, prefix="conformal ")
        F2 = conformal.obstructions[2].value
        report.obstructions.append(ObstructionReport.from_array("conformal F2", 2, F2))
        if conformal.is_k_d_minus_2:
            report.obstructions.append(
                ObstructionReport.from_array("conformal F2 antisymmetric trace", 2, antisymmetric_trace(F2))
            )
        if surface:
            report.obstructions.append(
                ObstructionReport.from_array("Willmore trace", 3, willmore_trace(conformal))
            )
            if conformal.is_k_d_minus_2:
                second = construct_conformal(self.scene, 2)
                report.add_check(
                    "representative independence", representative_probe(second), cfg.identity_tol,
                    "Willmore combination on the equivalence class",
                )
        if self.scene.conformal_factor is not None:
            residuals = scale_independence_residual(self.scene, max_order=3 if surface else 2)
            for name, value in sorted(residuals.items()):
                report.add_check(f"scale independence of {name}", value, cfg.derived_tol, "weighted rescaling")

    def willmore(self, report: Report, args: argparse.Namespace) -> None:
        """Explicit Willmore trace, classical comparison at d = 3 and optional holographic cross-check."""
        cfg = self.config
        frame = build_frame(self.scene)
        explicit = willmore_explicit(self.scene, frame)
        total = np.asarray(explicit.total)
        report.add_check(
            "Cayley-Hamilton simplification",
            float(np.max(np.abs(total - np.asarray(explicit.simplified)))),
            10 * cfg.structural_tol,
            "II̊³ term vanishes for surfaces",
        )
        report.obstructions.append(ObstructionReport.from_array("Willmore trace", 3, total))
        report.details["willmore"] = explicit.model_dump(mode="json")
        report.details["normalization"] = NORMALIZATION

        if self.scene.dimension == 3:
            report.add_check(
                "hypersurface expression",
                abs(hypersurface_willmore(self.scene, frame) - float(total[0])),
                cfg.identity_tol,
                "-(1/6) L·II̊",
            )
            flat = (self.scene.metric_jet().metric - np.eye(3)).max_abs() < 1e-12
            if flat:
                classical = classical_willmore(self.scene, orientation=frame.normals.value[0])
                report.add_check(
                    "classical Willmore expression", abs(classical - float(total[0])), cfg.identity_tol,
                    "-(1/6)(ΔH + 2H(H² - K))",
                )
            else:
                logger.warning("Classical Willmore comparison skipped: bulk metric is not flat")

        if self.scene.conformal_factor is not None:
            omega = float(self.scene.omega_at(JetSeries.variables(self.scene.point, 0)).value)
            rescaled = willmore_explicit(self.scene.rescaled())
            report.add_check(
                "conformal covariance", conformal_covariance_check(explicit, rescaled, omega),
                cfg.derived_tol, "weight -3 density",
            )

        if args.holographic_crosscheck:
            state, holographic = extract_willmore_holographic(self.scene, frame)
            report.add_check(
                "holographic cross-check", float(np.max(np.abs(holographic - total))),
                cfg.holographic_tol, "third-order maximal trace",
            )
            report.obstructions.append(ObstructionReport.from_array("holographic Willmore trace", 3, holographic))

    def extend(self, report: Report, args: argparse.Namespace) -> None:
        """Symmetric, restricted or conformal extension of a function given on Λ."""
        cfg = self.config
        order = args.order if args.order is not None else 2
        function = args.function
        if args.mode == "symmetric":
            result = symmetric_extension(construct(self.scene, order), function, order)
        elif args.mode == "restricted":
            result = restricted_extension(construct(self.scene, max(order - 1, 1)), function, max_order=order)
        else:
            state = construct_conformal(self.scene, 2)
            result = conformal_extension(state, function, args.weight)
        for name, value in sorted(result.residuals.items()):
            if name == "second-order trace":
                continue
            tolerance = cfg.structural_tol if name == "restriction" else cfg.identity_tol
            report.add_check(name, value, tolerance, anchor=f"{result.mode} extension")
        if result.obstruction is not None:
            values = np.asarray(result.obstruction)
            if result.mode == "restricted":
                k = self.scene.codimension
                values = values.reshape(k, k)
            report.obstructions.append(ObstructionReport.from_array(f"{result.mode} obstruction", 2, values))
        report.details["extension"] = result.model_dump(mode="json")

    def rmf(self, report: Report, args: argparse.Namespace) -> None:
        """Rotation minimizing and Coulomb frames of a curve."""
        cfg = self.config
        frame = build_frame(self.scene)
        rotated = rotation_minimizing_frame(frame)
        beta = extrinsic_data(rotated).normal_fundamental_form
        report.add_check("RMF normal fundamental form", beta.max_abs(), cfg.structural_tol, "parallel normal frame")
        report.add_check("RMF orthonormality", rotated.orthonormality_residual(), cfg.structural_tol, "orthonormal frame")

        gauged = apply_gauge(frame, coulomb_gauge(frame))
        data = extrinsic_data(gauged)
        unit_speed = data.normal_fundamental_form[0] / jets.sqrt(gauged.induced_metric[0, 0])
        drift = (unit_speed - unit_speed.value).max_abs()
        report.add_check("Coulomb gauge", drift, cfg.structural_tol, "constant unit-speed normal fundamental form")
        report.details["coulomb_beta"] = unit_speed.value.tolist()
        report.details["rmf_normals"] = rotated.normals.value.tolist()


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="exhol", description="Jet-level submanifold holography checks")
    parser.add_argument("command", choices=COMMANDS, help="Pipeline to run")
    parser.add_argument("scene", type=Path, help="Scene JSON file")
    parser.add_argument("--order", type=int, default=None, help="Target order for defining-map and extend")
    parser.add_argument("--conformal", action="store_true", help="Build the conformal defining density")
    parser.add_argument("--holographic-crosscheck", action="store_true", help="Compare with the holographic extraction")
    parser.add_argument(
        "--mode", choices=("symmetric", "restricted", "conformal"), default="symmetric", help="Extension problem"
    )
    parser.add_argument("--weight", type=float, default=0.0, help="Density weight for conformal extension")
    parser.add_argument("--function", default="u0", help="Function on Λ in u0..u{n-1}")
    parser.add_argument("--jet-order", type=int, default=None, help=f"Jet order (overrides {JET_ORDER_ENV})")
    parser.add_argument("--csv", type=Path, default=None, help="Write obstruction tables to this CSV file")
    parser.add_argument("--verbose", action="store_true", help="Debug logging on stderr")
    return parser.parse_args(argv)


def resolve_jet_order(config: ExholConfig, args: argparse.Namespace) -> Optional[int]:
    """Flag, then environment, then the scene file's own jet order."""
    if args.jet_order is not None:
        return args.jet_order
    if os.environ.get(JET_ORDER_ENV, "").strip():
        return config.jet_order
    return None


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    try:
        config = ExholConfig.from_env(jet_order=args.jet_order)
        scene_file = SceneFile.from_path(args.scene)
        runner = ExholRunner(config=config, scene_file=scene_file, jet_order=resolve_jet_order(config, args))
        report = runner.run(args.command, args)
    except (ExholError, ValidationError, FileNotFoundError) as e:
        logger.error(f"{args.command} failed on {args.scene}: {e}")
        return 2
    print(report.to_json())
    if args.csv is not None:
        write_csv(args.csv, report.obstructions)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
