"""Synthetic calibration targets from known ground-truth parameters."""
import logging
from typing import Optional, Sequence

import numpy as np
from tqdm import tqdm

from crowdcal.ad import TraceContext
from crowdcal.config import BottleneckConfig, ExitSelectionConfig, ForceConstants
from crowdcal.exceptions import InvalidInputError
from crowdcal.scenarios.bottleneck import bottleneck_statistic
from crowdcal.scenarios.exit_selection import exit_selection_histogram
from crowdcal.scenarios.histogram import Histogram20, wasserstein_1d
from crowdcal.scenarios.reference import ReferenceRecord
from crowdcal.social_force import ForceWeights

logger = logging.getLogger(__name__)

# anchor weights (w0, w1, w2) of the bottleneck studies
BOTTLENECK_TRUTH = (0.6, 5.5, 5.5)


def triangular_weights(bins: int = 20, peak: int = 9) -> np.ndarray:
    """Triangular input histogram peaked at bin index ``peak``."""
    index = np.arange(bins)
    return np.maximum(1.0 - np.abs(index - peak) / max(peak, bins - 1 - peak, 1), 0.0) + 1e-3


def make_reference(
    scenario: str,
    truth: Sequence[float],
    seeds: Sequence[int],
    bottleneck: Optional[BottleneckConfig] = None,
    exit_selection: Optional[ExitSelectionConfig] = None,
    constants: Optional[ForceConstants] = None,
    show_progress: bool = False,
) -> ReferenceRecord:
    """Average the model output at the ground truth over a seed set.

    Args:
        scenario: "bottleneck-position", "bottleneck-evac" or "exit-selection"
        truth: Ground-truth parameters (force weights or raw input-histogram weights)
        seeds: Simulation seeds
        bottleneck: Bottleneck config (objective is taken from the scenario name)
        exit_selection: Exit-selection config
        constants: Force constants
        show_progress: Show a progress bar

    Returns:
        The reference record; its metadata holds the truth and seeds

    Raises:
        InvalidInputError: For an empty seed set or unknown scenario
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise InvalidInputError("Reference generation needs at least one seed")
    truth = [float(t) for t in truth]
    metadata = {"truth": truth, "seeds": seeds}
    iterator = tqdm(seeds, desc=f"reference {scenario}", disable=not show_progress)

    if scenario.startswith("bottleneck"):
        objective = scenario.split("-", 1)[1] if "-" in scenario else "position"
        cfg = BottleneckConfig(**{**(bottleneck or BottleneckConfig()).to_dict(), "objective": objective})
        weights = ForceWeights.constant(truth)
        outputs = [float(bottleneck_statistic(cfg, weights, TraceContext(n=3), s, constants).value) for s in iterator]
        metadata["config"] = cfg.to_dict()
        logger.info(f"Reference {scenario}: mean {np.mean(outputs):.4f} over {len(seeds)} seeds")
        return ReferenceRecord(scenario, np.array([np.mean(outputs)]), None, metadata)

    if scenario == "exit-selection":
        cfg = exit_selection or ExitSelectionConfig()
        if len(truth) != cfg.bins:
            raise InvalidInputError(f"Exit-selection truth needs {cfg.bins} weights, got {len(truth)}")
        bins = Histogram20.coefficients(truth, cfg.coefficient_low, cfg.coefficient_high)
        total = np.zeros(cfg.bins)
        support = None
        for s in iterator:
            observed = exit_selection_histogram(cfg, bins, TraceContext(n=cfg.bins), s, constants)
            total += np.asarray(observed.normalized().value)
            support = observed.support
        metadata["config"] = cfg.to_dict()
        logger.info(f"Reference {scenario}: histogram over {len(seeds)} seeds")
        return ReferenceRecord(scenario, total / len(seeds), support, metadata)

    raise InvalidInputError(f"Unknown scenario: {scenario}")


def identifiability_gap(
    calibrated: Sequence[float],
    truth: Sequence[float],
    low: float = 0.1,
    high: float = 1.0,
    min_weight: float = 1e-6,
) -> float:
    """Wasserstein distance between calibrated and ground-truth input histograms.

    A small output-space objective with a large gap here means a differently
    shaped input distribution reproduces the same evacuation times.
    """
    a = np.maximum(np.asarray(calibrated, dtype=float), min_weight)
    b = np.maximum(np.asarray(truth, dtype=float), min_weight)
    return float(wasserstein_1d(Histogram20.coefficients(a, low, high), Histogram20.coefficients(b, low, high)).value)
