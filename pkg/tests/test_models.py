"""
Tests for configuration, scene files and report models.
"""

import json

import numpy as np
import pytest
from pydantic import ValidationError

from exhol.exceptions import SceneError
from exhol.jets import JetSeries
from exhol.models import (
    JET_ORDER_ENV,
    CheckResult,
    ExholConfig,
    ExtensionResult,
    ObstructionReport,
    Report,
    SceneFile,
)
from exhol.utils.serialization import bundled_scene_path

FLAT3 = [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]]


class TestExholConfig:
    """Test suite for ExholConfig."""

    def test_defaults(self):
        """Test the default jet order and tolerance hierarchy."""
        config = ExholConfig()

        assert config.jet_order == 6
        assert config.max_order == 4
        assert config.projector_tol < config.structural_tol < config.identity_tol
        assert config.identity_tol < config.derived_tol < config.holographic_tol

    def test_env_override(self):
        """Test that EXHOL_JET_ORDER overrides the default jet order."""
        config = ExholConfig.from_env({JET_ORDER_ENV: " 8 "})

        assert config.jet_order == 8

    def test_blank_env_ignored(self):
        """Test that an empty variable leaves the default in place."""
        assert ExholConfig.from_env({JET_ORDER_ENV: "  "}).jet_order == 6

    def test_explicit_override_wins(self):
        """Test that keyword overrides take precedence over the environment."""
        config = ExholConfig.from_env({JET_ORDER_ENV: "8"}, jet_order=5, max_order=None)

        assert config.jet_order == 5
        assert config.max_order == 4

    @pytest.mark.parametrize("raw", ["0", "-3", "six"])
    def test_invalid_env_value(self, raw):
        """Test that an invalid jet order is a validation error."""
        with pytest.raises(ValidationError):
            ExholConfig.from_env({JET_ORDER_ENV: raw})

    def test_nonpositive_tolerance(self):
        """Test that tolerances must be positive."""
        with pytest.raises(ValidationError):
            ExholConfig(derived_tol=0.0)


class TestSceneFile:
    """Test suite for SceneFile validation."""

    @pytest.fixture
    def document(self):
        """A valid plane-in-R^3 document."""
        return {
            "dimension": 3,
            "codimension": 1,
            "metric": FLAT3,
            "embedding": ["u0", "u1", 0],
            "base_point": [0.1, 0.2],
            "name": "plane",
        }

    def test_valid_document(self, document):
        """Test that numbers in expression slots are turned into strings."""
        scene_file = SceneFile(**document)

        assert scene_file.embedding == ["u0", "u1", "0"]
        assert scene_file.jet_order == 6
        assert scene_file.text_symmetric

    def test_to_scene(self, document):
        """Test the conversion to a parsed Scene with a jet-order override."""
        scene = SceneFile(**document).to_scene(jet_order=4)

        assert scene.jet_order == 4
        assert scene.codimension == 1
        assert scene.name == "plane"

    @pytest.mark.parametrize(
        "key, value",
        [
            ("codimension", 3),
            ("base_point", [0.1]),
            ("embedding", ["u0", "u1"]),
            ("metric", [["1", "0"], ["0", "1"]]),
            ("frame_seeds", [["0", "0", "1"], ["1", "0", "0"]]),
            ("dimension", 2),
            ("jet_order", 0),
        ],
    )
    def test_shape_errors(self, document, key, value):
        """Test that malformed documents fail validation."""
        document[key] = value

        with pytest.raises(ValidationError):
            SceneFile(**document)

    def test_asymmetric_metric(self, document):
        """Test that a metric asymmetric at the base point raises SceneError."""
        document["metric"] = [["1", "0.1*x0", "0"], ["0", "1", "0"], ["0", "0", "1"]]

        with pytest.raises(SceneError):
            SceneFile(**document).to_scene()

    def test_text_asymmetric_but_symmetric_value(self, document):
        """Test that differently written but equal entries are accepted."""
        document["metric"] = [["1", "0.1*x0", "0"], ["x0*0.1", "1", "0"], ["0", "0", "1"]]
        scene_file = SceneFile(**document)

        assert not scene_file.text_symmetric
        assert scene_file.to_scene().dimension == 3

    def test_from_path(self):
        """Test loading a bundled scene file."""
        scene_file = SceneFile.from_path(bundled_scene_path("circle"))

        assert scene_file.codimension == 2
        assert scene_file.frame_seeds is not None


class TestReports:
    """Test suite for checks, obstruction tables and reports."""

    def test_check_result(self):
        """Test that a check passes strictly below its tolerance."""
        assert CheckResult(name="a", value=1e-10, tolerance=1e-9).passed
        assert not CheckResult(name="b", value=1e-9, tolerance=1e-9).passed
        assert not CheckResult(name="c", value=float("nan"), tolerance=1.0).passed

    def test_obstruction_rows(self):
        """Test that rows carry 1-based index labels."""
        obstruction = ObstructionReport.from_array("F2", 2, np.arange(4.0).reshape(2, 2))

        assert obstruction.shape == [2, 2]
        assert obstruction.rows()[1] == ("F2", "12", 1.0)
        np.testing.assert_allclose(obstruction.to_array(), np.arange(4.0).reshape(2, 2))

    def test_scalar_obstruction_label(self):
        """Test that a scalar obstruction gets the '-' label."""
        rows = ObstructionReport.from_array("P2", 2, np.asarray(0.5)).rows()

        assert rows == [("P2", "-", 0.5)]

    def test_report_exit_code(self):
        """Test that one failing check turns the exit code to 1."""
        report = Report(command="verify")
        report.add_check("good", 0.0, 1e-9)
        assert report.exit_code == 0

        report.add_check("bad", 1.0, 1e-9, anchor="identity")
        assert report.exit_code == 1
        assert [check.name for check in report.failures()] == ["bad"]

    def test_report_json(self):
        """Test that the JSON form includes the computed pass flag."""
        report = Report(command="rmf", scene="helix")
        report.add_check("RMF orthonormality", 1e-12, 1e-9)

        data = json.loads(report.to_json())
        assert data["passed"] is True
        assert data["checks"][0]["passed"] is True

    def test_extension_result_obstructed(self):
        """Test the obstructed flag of an extension result."""
        extended = JetSeries.variables([0.0], 1)[0]
        result = ExtensionResult(mode="restricted", order=2, extended=extended, obstruction=[0.0, 1.0])

        assert result.obstructed
        assert "extended" not in result.model_dump()
