"""Gradient-fidelity studies: sweep one coordinate, compare estimators with a reference."""
import logging
import os
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from crowdcal.config import Settings
from crowdcal.estimators import EstimatorConfig, EstimatorKind, ProgramHandle, estimate, gradient_mae, reference_gradient
from crowdcal.exceptions import InvalidConfigError
from crowdcal.harness.plans import FidelityPlan
from crowdcal.harness.problems import scenario_program
from crowdcal.seeds import derive_seed
from crowdcal.scenarios import BOTTLENECK_TRUTH, SYNTHETIC_PROGRAMS, exact_gradient

logger = logging.getLogger(__name__)

ESTIMATOR_COLUMNS = ("ipa", "dgo", "hybrid", "pgo")

# seed streams under the plan seed
_REFERENCE_STREAM = 0
_ESTIMATE_STREAM = 1


@dataclass
class FidelityResult:
    frame: pd.DataFrame
    mae: pd.DataFrame
    jumps: int
    csv_path: Optional[str] = None
    mae_path: Optional[str] = None


def fidelity_program(scenario: str, settings: Settings) -> Tuple[ProgramHandle, bool]:
    """Program swept by a fidelity study, and whether a closed-form gradient exists.

    Simulation scenarios are swept on their calibration objective.
    """
    if scenario in SYNTHETIC_PROGRAMS:
        return SYNTHETIC_PROGRAMS[scenario](), True
    return scenario_program(scenario, settings), False


def base_point(plan: FidelityPlan, program: ProgramHandle) -> np.ndarray:
    """Values of the coordinates held fixed during the sweep."""
    if plan.fixed is not None:
        theta = np.asarray(plan.fixed, dtype=float)
    elif program.n == len(BOTTLENECK_TRUTH) and program.name.startswith("bottleneck"):
        theta = np.asarray(BOTTLENECK_TRUTH, dtype=float)
    else:
        theta = np.zeros(program.n)
    if theta.shape != (program.n,):
        raise InvalidConfigError(f"{program.name} has {program.n} parameters, fixed values give {theta.size}")
    if not 0 <= plan.coordinate < program.n:
        raise InvalidConfigError(f"Coordinate {plan.coordinate} out of range for {program.n} parameters")
    return theta


def count_jumps(values: np.ndarray, factor: float = 10.0) -> int:
    """Number of steps in a sampled curve much larger than its typical step.

    A step counts as a jump when it exceeds ``factor`` times the median
    absolute step; a curve that is flat almost everywhere counts every
    nonzero step.
    """
    steps = np.abs(np.diff(np.asarray(values, dtype=float)))
    if steps.size == 0:
        return 0
    typical = np.median(steps)
    if typical == 0.0:
        return int(np.count_nonzero(steps > 1e-12))
    return int(np.count_nonzero(steps > factor * typical))


def _estimator_config(plan: FidelityPlan, name: str, samples: int, seed: int, registry_cap: int) -> EstimatorConfig:
    kind = EstimatorKind(name)
    sigma = plan.pgo_sigma if kind == EstimatorKind.PGO else plan.sigma
    return EstimatorConfig(samples=samples, sigma=sigma, mode=kind, seed=seed, registry_cap=registry_cap)


def run_fidelity(plan: FidelityPlan, settings: Settings) -> FidelityResult:
    """Sweep one coordinate and estimate the gradient at every point.

    Writes ``fidelity_<scenario>.csv`` with one row per (point, sample
    count) and ``fidelity_<scenario>_mae.csv`` with the mean absolute error
    of each estimator on the swept coordinate.
    """
    program, exact = fidelity_program(plan.scenario, settings)
    theta0 = base_point(plan, program)
    grid = np.linspace(plan.lo, plan.hi, plan.points)
    started = time.perf_counter()
    logger.info(
        f"Fidelity sweep {program.name}: coordinate {plan.coordinate} over [{plan.lo}, {plan.hi}] "
        f"({plan.points} points, samples {plan.samples}, estimators {plan.estimators})"
    )

    rows: List[Dict[str, float]] = []
    gradients: Dict[Tuple[str, int], List[np.ndarray]] = {}
    references: List[np.ndarray] = []
    curve = np.empty(plan.points)

    for k, value in enumerate(tqdm(grid, desc="fidelity", disable=not plan.show_progress)):
        theta = theta0.copy()
        theta[plan.coordinate] = value
        if exact:
            ref = exact_gradient(plan.scenario, theta)
        else:
            ref = reference_gradient(
                program, theta, plan.reference_samples, plan.reference_sigma,
                seed=derive_seed(plan.seed, (_REFERENCE_STREAM, k)),
            )
        references.append(ref)

        for samples in plan.samples:
            seed = derive_seed(plan.seed, (_ESTIMATE_STREAM, k, samples))
            row = {"param_value": float(value), "samples": samples, "output_mean": np.nan}
            for name in plan.estimators:
                cfg = _estimator_config(plan, name, samples, seed, settings.harness.registry_cap)
                result = estimate(program, theta, cfg)
                gradients.setdefault((name, samples), []).append(result.gradient)
                row[name] = float(result.gradient[plan.coordinate])
                if np.isnan(row["output_mean"]):
                    row["output_mean"] = result.mean_output
            row["reference"] = float(ref[plan.coordinate])
            rows.append(row)
        curve[k] = rows[-1]["output_mean"]

    columns = ["param_value", "samples", "output_mean"] + [c for c in ESTIMATOR_COLUMNS if c in plan.estimators] + ["reference"]
    frame = pd.DataFrame(rows, columns=columns)

    mae_rows = []
    for (name, samples), estimates in sorted(gradients.items(), key=lambda item: (ESTIMATOR_COLUMNS.index(item[0][0]), item[0][1])):
        mae_rows.append({
            "estimator": name,
            "samples": samples,
            "mae": gradient_mae(estimates, references, coordinate=plan.coordinate),
        })
    mae = pd.DataFrame(mae_rows, columns=["estimator", "samples", "mae"])

    jumps = count_jumps(curve)
    result = FidelityResult(frame, mae, jumps)
    if plan.output_dir:
        os.makedirs(plan.output_dir, exist_ok=True)
        result.csv_path = os.path.join(plan.output_dir, f"fidelity_{plan.scenario}.csv")
        result.mae_path = os.path.join(plan.output_dir, f"fidelity_{plan.scenario}_mae.csv")
        frame.to_csv(result.csv_path, index=False)
        mae.to_csv(result.mae_path, index=False)

    elapsed = time.perf_counter() - started
    logger.info(f"Fidelity sweep finished in {elapsed:.1f}s; output curve has {jumps} jumps")
    for _, r in mae.iterrows():
        logger.info(f"  MAE {r['estimator']:>6} S={int(r['samples']):<5} {r['mae']:.6g}")
    return result
