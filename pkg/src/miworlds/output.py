"""Result files: CSV tables, JSON summaries and the configuration echo."""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from miworlds.config import save_config
from miworlds.core import PhysicalParams, WorldEnsemble, from_dimensionless
from miworlds.exceptions import OutputError
from miworlds.scenarios import ScenarioReport
from miworlds.utils import variant_name
from miworlds.validators import validate_output_path

FLOAT_FORMAT = "%.17g"

TRAJECTORY_FILE = "trajectory.csv"
ENERGY_FILE = "energy.csv"
SUMMARY_FILE = "summary.json"
CONFIG_ECHO_FILE = "resolved_config.yaml"
FORCES_FILE = "forces.csv"


def write_csv(df: pd.DataFrame, path: Path, overwrite: bool = True) -> Path:
    """Write a table with fixed 17-significant-digit float formatting."""
    validate_output_path(path, overwrite)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise OutputError(f"Could not write {path}: {e}")
    return path


def _json_default(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def write_summary(summary: Dict[str, Any], path: Path, overwrite: bool = True) -> Path:
    validate_output_path(path, overwrite)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(summary, f, indent=2, sort_keys=False, default=_json_default)
            f.write("\n")
    except OSError as e:
        raise OutputError(f"Could not write {path}: {e}")
    return path


def samples_frame(ensemble: WorldEnsemble, physical: Optional[PhysicalParams] = None) -> pd.DataFrame:
    """index, position_dimensionless (plus position_physical when requested)."""
    df = pd.DataFrame(
        {
            "index": np.arange(1, ensemble.n_worlds + 1),
            "position_dimensionless": ensemble.positions,
        }
    )
    if physical is not None:
        df["position_physical"] = from_dimensionless(ensemble.positions, physical)
    return df


def write_report(
    report: ScenarioReport,
    out_dir: Path,
    config: Dict[str, Any],
    formats: List[str],
    physical: Optional[PhysicalParams] = None,
) -> List[Path]:
    """Write trajectory, energy, summary and config echo of a run.

    Refined variants go to sibling directories named after their dt.
    """
    written = []
    if "csv" in formats and len(report.trajectory):
        written.append(
            write_csv(report.trajectory.trajectory_frame(physical), out_dir / TRAJECTORY_FILE)
        )
        written.append(write_csv(report.trajectory.energy_frame(physical), out_dir / ENERGY_FILE))
    if "json" in formats:
        written.append(write_summary(report.summary(), out_dir / SUMMARY_FILE))

    echo = out_dir / CONFIG_ECHO_FILE
    save_config(echo, config)
    written.append(echo)

    for variant in report.variants:
        variant_dir = out_dir.parent / variant_name(out_dir.name, variant.metrics.get("dt", 0.0))
        written.extend(write_report(variant, variant_dir, config, formats, physical))
    return written
