"""
Robustness Report - Building Block: RobustnessReport

Purpose:
    Collect curves, distance and transfer tables, label snapshots and the
    per-sample records behind them, and serialize the lot.

Output Data (under the output directory):
    - report.json: full nested report + metadata
    - curves.csv: attack, model, epsilon, ratio, n
    - distances.csv, transfer.csv, per_sample.csv
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd

from ..utils.logger import setup_logger
from ..utils.timestamp import utc_now
from .robustness import DistanceResult, FoolingCurve, LabelSnapshot, TransferResult

logger = setup_logger(__name__)

CURVE_COLUMNS = ["attack", "model", "epsilon", "ratio", "n"]
DISTANCE_COLUMNS = ["attack", "model", "norm", "mean_distance", "successes", "attempted"]
TRANSFER_COLUMNS = ["attack", "source", "target", "accuracy", "n", "accuracy_on_fooled", "n_fooled"]
SAMPLE_COLUMNS = [
    "model", "attack", "epsilon", "index", "y_true", "fooled", "norm", "achieved_norm",
    "success", "label_before", "label_after", "target", "queries", "steps_taken", "flag",
]
FLOAT_FORMAT = "%.17g"


def _clean(value: Any) -> Any:
    """NaN -> None, recursively, so report.json stays strict JSON."""
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_clean(v) for v in value]
    return value


@dataclass
class RobustnessReport:
    """
    Aggregated evaluation results.

    ``metadata`` carries seeds, the resolved config and checkpoint hashes;
    ``generated_at`` is the only field that differs between regenerations.
    """

    metadata: Dict[str, Any] = field(default_factory=dict)
    curves: List[FoolingCurve] = field(default_factory=list)
    distances: List[DistanceResult] = field(default_factory=list)
    transfers: List[TransferResult] = field(default_factory=list)
    snapshots: Dict[str, List[LabelSnapshot]] = field(default_factory=dict)
    generated_at: str = field(default_factory=utc_now)

    def per_sample_records(self) -> List[Dict[str, Any]]:
        records: List[Dict[str, Any]] = []
        for curve in self.curves:
            records.extend(curve.records)
        for distance in self.distances:
            records.extend(distance.records)
        return records

    def curve_frame(self) -> pd.DataFrame:
        rows = [row for curve in self.curves for row in curve.rows()]
        return pd.DataFrame(rows, columns=CURVE_COLUMNS)

    def distance_frame(self) -> pd.DataFrame:
        return pd.DataFrame([d.row() for d in self.distances], columns=DISTANCE_COLUMNS)

    def transfer_frame(self) -> pd.DataFrame:
        return pd.DataFrame([t.row() for t in self.transfers], columns=TRANSFER_COLUMNS)

    def sample_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.per_sample_records(), columns=SAMPLE_COLUMNS)

    def to_dict(self) -> Dict[str, Any]:
        return _clean({
            "generated_at": self.generated_at,
            "metadata": self.metadata,
            "curves": [
                {"attack": c.attack, "model": c.model, "monotone": c.monotone,
                 "points": [{"epsilon": p.epsilon, "ratio": p.ratio, "n": p.count}
                            for p in c.points]}
                for c in self.curves
            ],
            "distances": [d.row() for d in self.distances],
            "transfers": [t.row() for t in self.transfers],
            "snapshots": {model: [s.to_dict() for s in snaps]
                          for model, snaps in self.snapshots.items()},
            "per_sample": self.per_sample_records(),
        })

    def write(self, out_dir: Union[str, Path]) -> Dict[str, str]:
        """Write report.json and the CSV set; returns {name: path}."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"report": out / "report.json"}
        paths["report"].write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        frames = {
            "curves": self.curve_frame(),
            "distances": self.distance_frame(),
            "transfer": self.transfer_frame(),
            "per_sample": self.sample_frame(),
        }
        for name, frame in frames.items():
            path = out / f"{name}.csv"
            frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
            paths[name] = path
        logger.info("Report written", extra={"out_dir": str(out), "curves": len(self.curves),
                                             "distances": len(self.distances),
                                             "transfers": len(self.transfers)})
        return {name: str(path) for name, path in paths.items()}


def write_sample_records(records: List[Dict[str, Any]], path: Union[str, Path]) -> Path:
    """per_sample.csv for a single attack run."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(records, columns=SAMPLE_COLUMNS).to_csv(path, index=False,
                                                          float_format=FLOAT_FORMAT)
    return path


def read_curves_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")
