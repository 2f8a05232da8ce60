"""Projected gradient descent driven by any of the gradient estimators."""
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Sequence

import numpy as np

from crowdcal.estimators import EstimatorConfig, estimate
from crowdcal.exceptions import CrowdCalError, InvalidConfigError
from crowdcal.seeds import derive_seed
from crowdcal.optimizers.base import Budget, CalibrationProblem, OptimizerRun

logger = logging.getLogger(__name__)

LEARNING_RATES = (0.01, 0.1, 0.5, 1.0)


@dataclass(frozen=True)
class GDConfig:
    """Plain gradient descent hyperparameters."""
    learning_rate: float = 0.1
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidConfigError(f"learning rate must be > 0, got {self.learning_rate}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "learning_rate": self.learning_rate,
            "estimator": self.estimator.mode.value,
            "samples": self.estimator.samples,
            "sigma": self.estimator.sigma,
        }


def gradient_descent(
    problem: CalibrationProblem,
    cfg: GDConfig,
    theta0: Sequence[float],
    budget: Budget,
) -> OptimizerRun:
    """Iterate theta <- project(theta - lr * g) until the budget is spent.

    Every step costs ``samples * microreplications`` trajectories (twice that
    for PGO). A failed estimate skips the update but is still charged.

    Args:
        problem: Calibration problem (program, bounds, replication)
        cfg: Learning rate and estimator settings
        theta0: Starting point (projected onto the bounds)
        budget: Evaluation / wall-time budget

    Returns:
        The run trace; step 0 is the starting point
    """
    started = time.perf_counter()
    run = OptimizerRun("gd", cfg.to_dict(), budget)
    theta = problem.project(theta0)
    cost = cfg.estimator.evaluations_per_estimate * problem.microreplications
    used = 0
    run.record(0, "init", used, started, np.nan, theta, problem.crisp(theta))

    step = 0
    while budget.allows(used, cost, started):
        step += 1
        used += cost
        est_cfg = replace(cfg.estimator, seed=derive_seed(problem.seed, (step,)))
        try:
            est = estimate(problem.objective_program, theta, est_cfg)
        except CrowdCalError as e:
            logger.warning(f"GD step {step} skipped: {e}")
            run.record(step, "skipped", used, started, np.nan, theta, problem.crisp(theta))
            continue

        theta = problem.project(theta - cfg.learning_rate * est.gradient)
        run.record(step, "search", used, started, est.mean_output, theta, problem.crisp(theta))

    logger.debug(f"GD finished after {step} steps, {used} evaluations, best crisp {run.best_crisp:.6g}")
    return run
