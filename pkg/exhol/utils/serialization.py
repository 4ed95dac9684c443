"""
Report writers and scene hashing.
"""

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Iterable, List, Union

from ..models import ObstructionReport, Report, SceneFile

logger = logging.getLogger(__name__)

CSV_FIELDS = ["name", "order", "index", "value"]
SCENES_DIR = Path(__file__).resolve().parent.parent / "scenes"


def scene_hash(scene: SceneFile) -> str:
    """SHA-256 of the canonical JSON form of a scene document."""
    canonical = json.dumps(scene.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def obstruction_rows(obstructions: Iterable[ObstructionReport]) -> List[dict]:
    rows = []
    for obstruction in obstructions:
        for name, index, value in obstruction.rows():
            rows.append({"name": name, "order": obstruction.order, "index": index, "value": value})
    return rows


def write_csv(path: Union[str, Path], obstructions: Iterable[ObstructionReport]) -> Path:
    """Write obstruction tables as name, order, index, value rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = obstruction_rows(obstructions)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    logger.info(f"Wrote {len(rows)} obstruction rows to {path}")
    return path


def write_report(path: Union[str, Path], report: Report) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_json() + "\n", encoding="utf-8")
    logger.info(f"Wrote {report.command} report to {path}")
    return path


def read_report(path: Union[str, Path]) -> Report:
    return Report.model_validate_json(Path(path).read_text(encoding="utf-8"))


def bundled_scene_path(name: str) -> Path:
    """Path of a scene JSON shipped in exhol/scenes."""
    path = SCENES_DIR / f"{name}.json"
    if not path.exists():
        raise FileNotFoundError(f"No bundled scene named {name!r} in {SCENES_DIR}")
    return path


def load_bundled_scene(name: str) -> SceneFile:
    return SceneFile.from_path(bundled_scene_path(name))


def load_expected() -> dict:
    """Expected values for the bundled scenes."""
    return json.loads((SCENES_DIR / "expected.json").read_text(encoding="utf-8"))
