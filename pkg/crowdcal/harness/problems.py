"""Calibration problems by scenario name."""
import logging
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from crowdcal.config import Settings
from crowdcal.estimators.types import ProgramHandle
from crowdcal.exceptions import InvalidConfigError, MissingReferenceError
from crowdcal.optimizers import CalibrationProblem
from crowdcal.scenarios import (
    bottleneck_program,
    exit_selection_program,
    load_reference,
    shifted_sphere,
)
from crowdcal.scenarios.synthetic import heaviside, quadratic

logger = logging.getLogger(__name__)

WEIGHT_BOUNDS = (0.0, 10.0)
SPHERE_CENTER = (1.0, 2.0, 3.0)


def scenario_program(scenario: str, settings: Settings, reference_path: Optional[str] = None) -> ProgramHandle:
    """Program handle of a named scenario.

    Raises:
        MissingReferenceError: If a simulation scenario has no readable reference
        InvalidConfigError: For an unknown scenario
    """
    if scenario.startswith("bottleneck"):
        objective = scenario.split("-", 1)[1]
        cfg = replace(settings.bottleneck, objective=objective)
        if reference_path is not None:
            cfg = replace(cfg, reference=load_reference(reference_path).scalar)
        return bottleneck_program(cfg, settings.force)
    if scenario == "exit-selection":
        path = reference_path or settings.exit_selection.reference_path
        if not path:
            raise MissingReferenceError("exit-selection needs a reference histogram (--reference)")
        cfg = replace(settings.exit_selection, reference_path=path)
        return exit_selection_program(cfg, constants=settings.force)
    if scenario == "heaviside":
        return heaviside()
    if scenario == "quadratic":
        return quadratic()
    if scenario == "sphere":
        return shifted_sphere(SPHERE_CENTER)
    raise InvalidConfigError(f"Unknown scenario: {scenario}")


def scenario_bounds(scenario: str, settings: Settings, n: int):
    """Box bounds of the calibration parameters."""
    if scenario.startswith("bottleneck"):
        return np.full(n, WEIGHT_BOUNDS[0]), np.full(n, WEIGHT_BOUNDS[1])
    if scenario == "exit-selection":
        return np.full(n, settings.exit_selection.min_weight), np.ones(n)
    if scenario == "heaviside":
        return np.full(n, -3.0), np.full(n, 3.0)
    if scenario == "quadratic":
        return np.full(n, -10.0), np.full(n, 10.0)
    return np.full(n, -5.0), np.full(n, 5.0)


def build_problem(
    scenario: str,
    settings: Settings,
    reference_path: Optional[str],
    microreplications: int,
    crisp_seeds: Sequence[int],
    seed: int,
) -> CalibrationProblem:
    """Calibration problem for one optimization run."""
    program = scenario_program(scenario, settings, reference_path)
    lower, upper = scenario_bounds(scenario, settings, program.n)
    return CalibrationProblem(
        program=program,
        lower=lower,
        upper=upper,
        microreplications=microreplications,
        crisp_seeds=list(crisp_seeds),
        seed=seed,
    )


def check_reference(scenario: str, reference_path: Optional[str], settings: Settings) -> None:
    """Fail early when a simulation scenario lacks its reference file."""
    if scenario in ("heaviside", "quadratic", "sphere"):
        return
    if scenario.startswith("bottleneck") and reference_path is None:
        logger.info(f"No reference file for {scenario}; using bottleneck.reference={settings.bottleneck.reference}")
        return
    path = reference_path or settings.exit_selection.reference_path
    if not path:
        raise MissingReferenceError(f"{scenario} needs a reference file")
    load_reference(path)
