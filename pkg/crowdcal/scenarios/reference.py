"""Reading and writing calibration reference files.

A reference file is a CSV table preceded by ``# key=value`` header lines that
record how the reference was generated (scenario, ground truth, seeds and
config). Scalar references have a single ``reference`` column; histogram
references have ``support`` and ``weight`` columns.
"""
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from crowdcal.ad import DualReal
from crowdcal.exceptions import MissingReferenceError
from crowdcal.scenarios.histogram import Histogram20

logger = logging.getLogger(__name__)


@dataclass
class ReferenceRecord:
    """A calibration target and the metadata of its generation."""
    scenario: str
    values: np.ndarray
    support: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_histogram(self) -> bool:
        return self.support is not None

    @property
    def scalar(self) -> float:
        if self.is_histogram:
            raise MissingReferenceError(f"Reference for {self.scenario} is a histogram, not a scalar")
        return float(self.values[0])

    def histogram(self, n: int) -> Histogram20:
        """Constant Histogram20 of the stored weights with tangent dimension n."""
        if not self.is_histogram:
            raise MissingReferenceError(f"Reference for {self.scenario} is a scalar, not a histogram")
        return Histogram20(DualReal.constant(self.values, n), self.support)


def save_reference(record: ReferenceRecord, path: str) -> str:
    """Write a reference file; metadata values are stored as JSON."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    if record.is_histogram:
        frame = pd.DataFrame({"support": record.support, "weight": record.values})
    else:
        frame = pd.DataFrame({"reference": np.atleast_1d(record.values)})

    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# scenario={json.dumps(record.scenario)}\n")
        for key, value in record.metadata.items():
            f.write(f"# {key}={json.dumps(value)}\n")
        frame.to_csv(f, index=False)

    logger.info(f"Saved {record.scenario} reference to {path}")
    return path


def load_reference(path: str) -> ReferenceRecord:
    """Read a reference file written by ``save_reference``.

    Raises:
        MissingReferenceError: If the file does not exist or has no usable table
    """
    if not os.path.exists(path):
        raise MissingReferenceError(f"Reference file not found: {path}")

    metadata: Dict[str, Any] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, raw = line[1:].strip().partition("=")
            try:
                metadata[key] = json.loads(raw)
            except json.JSONDecodeError:
                metadata[key] = raw

    frame = pd.read_csv(path, comment="#")
    scenario = str(metadata.pop("scenario", "unknown"))
    if "weight" in frame.columns:
        return ReferenceRecord(
            scenario, frame["weight"].to_numpy(dtype=float), frame["support"].to_numpy(dtype=float), metadata
        )
    if "reference" in frame.columns and len(frame):
        return ReferenceRecord(scenario, frame["reference"].to_numpy(dtype=float), None, metadata)
    raise MissingReferenceError(f"Reference file {path} has no 'reference' or 'weight' column")
