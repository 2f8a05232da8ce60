"""Hyperparameter sweeps with macroreplications, and replay of single runs.

Layout of a sweep directory:

    settings.json       the flattened settings the sweep ran under
    manifest.csv        one row per run: id, method, hyperparameters, seeds, status
    runs/<run_id>.csv   trace of the run, ending with a "post" row
    summary.csv         best configuration per method by mean post objective
"""
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from crowdcal.config import Settings
from crowdcal.exceptions import CrowdCalError, InvalidInputError, MissingReferenceError
from crowdcal.harness.plans import MethodConfig, SweepPlan
from crowdcal.harness.problems import build_problem, check_reference
from crowdcal.seeds import derive_seed, generator
from crowdcal.optimizers import Budget, OptimizerRun, genetic_algorithm, gradient_descent, pso
from crowdcal.optimizers.base import TraceRow

logger = logging.getLogger(__name__)

# spawn-key streams under the master seed
CRISP_STREAM = 1
POST_STREAM = 2

TRACE_COMPARE_EXCLUDE = ("wall_ms",)
SETTINGS_FILE = "settings.json"


@dataclass
class RunSpec:
    """Everything needed to execute (or re-execute) one optimization run."""
    run_id: str
    scenario: str
    config: MethodConfig
    macroreplication: int
    seed: int
    master_seed: int
    microreplications: int
    max_evaluations: int
    budget_seconds: Optional[float]
    crisp_seeds: List[int]
    post_seeds: List[int]
    reference_path: Optional[str] = None

    def manifest_row(self) -> Dict[str, Any]:
        return {
            "run_id": self.run_id,
            "scenario": self.scenario,
            "method": self.config.method,
            "config_id": self.config.config_id,
            "config_index": self.config.index,
            "hyperparameters": json.dumps(self.config.params),
            "macroreplication": self.macroreplication,
            "seed": str(self.seed),
            "master_seed": self.master_seed,
            "microreplications": self.microreplications,
            "max_evaluations": self.max_evaluations,
            "budget_seconds": self.budget_seconds if self.budget_seconds is not None else "",
            "crisp_seeds": len(self.crisp_seeds),
            "post_seeds": len(self.post_seeds),
            "reference_path": self.reference_path or "",
        }

    @classmethod
    def from_manifest_row(cls, row: Dict[str, Any]) -> "RunSpec":
        master = int(row["master_seed"])
        config = MethodConfig(
            config_id=str(row["config_id"]),
            index=int(row["config_index"]),
            method=str(row["method"]),
            hyperparameters=tuple(sorted(json.loads(row["hyperparameters"]).items())),
        )
        budget_seconds = row.get("budget_seconds")
        return cls(
            run_id=str(row["run_id"]),
            scenario=str(row["scenario"]),
            config=config,
            macroreplication=int(row["macroreplication"]),
            seed=int(row["seed"]),
            master_seed=master,
            microreplications=int(row["microreplications"]),
            max_evaluations=int(row["max_evaluations"]),
            budget_seconds=None if pd.isna(budget_seconds) or budget_seconds == "" else float(budget_seconds),
            crisp_seeds=seed_set(master, CRISP_STREAM, int(row["crisp_seeds"])),
            post_seeds=seed_set(master, POST_STREAM, int(row["post_seeds"])),
            reference_path=str(row["reference_path"]) if not pd.isna(row["reference_path"]) and row["reference_path"] else None,
        )


@dataclass
class RunOutcome:
    run_id: str
    trace: Optional[pd.DataFrame]
    post_objective: float
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class SweepResult:
    output_dir: str
    manifest: pd.DataFrame
    summary: pd.DataFrame
    failed: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed


def seed_set(master_seed: int, stream: int, count: int) -> List[int]:
    """Fixed evaluation seeds shared by every run of a sweep."""
    return [derive_seed(master_seed, (stream, k)) for k in range(count)]


def plan_runs(plan: SweepPlan) -> List[RunSpec]:
    """One RunSpec per (configuration, macroreplication)."""
    crisp = seed_set(plan.master_seed, CRISP_STREAM, plan.crisp_seeds)
    post = seed_set(plan.master_seed, POST_STREAM, plan.post_seeds)
    specs = []
    for config in plan.configs:
        for macro in range(plan.macroreplications):
            specs.append(RunSpec(
                run_id=f"{config.config_id}-m{macro:02d}",
                scenario=plan.scenario,
                config=config,
                macroreplication=macro,
                seed=derive_seed(plan.master_seed, (config.index, macro)),
                master_seed=plan.master_seed,
                microreplications=plan.microreplications,
                max_evaluations=plan.max_evaluations,
                budget_seconds=plan.budget_seconds,
                crisp_seeds=crisp,
                post_seeds=post,
                reference_path=plan.reference_path,
            ))
    return specs


def run_optimizer(spec: RunSpec, settings: Settings, budget: Budget) -> Tuple[OptimizerRun, float]:
    """Execute the optimizer of a spec and post-evaluate its final incumbent."""
    problem = build_problem(
        spec.scenario, settings, spec.reference_path, spec.microreplications, spec.crisp_seeds, spec.seed
    )
    optimizer_cfg = spec.config.build(settings.harness.registry_cap)
    method = spec.config.method
    if method.startswith("gd-"):
        theta0 = generator(spec.seed, 0).uniform(problem.lower, problem.upper)
        run = gradient_descent(problem, optimizer_cfg, theta0, budget)
    elif method == "pso":
        run = pso(problem, optimizer_cfg, budget)
    else:
        run = genetic_algorithm(problem, optimizer_cfg, budget)

    post_problem = build_problem(
        spec.scenario, settings, spec.reference_path, 1, spec.post_seeds, spec.seed
    )
    incumbent = run.incumbent
    post = post_problem.crisp(incumbent)
    last = run.rows[-1]
    run.rows.append(TraceRow(
        step=last.step + 1,
        phase="post",
        evaluations=last.evaluations,
        wall_ms=last.wall_ms,
        objective=post,
        crisp_objective=post,
        best_crisp=min(last.best_crisp, post),
        params=list(last.params),
    ))
    return run, post


def execute_run(spec: RunSpec, settings: Settings, budget: Optional[Budget] = None) -> RunOutcome:
    """Run one spec, turning toolkit errors into a failed outcome."""
    budget = budget or Budget(spec.max_evaluations, spec.budget_seconds)
    try:
        run, post = run_optimizer(spec, settings, budget)
    except CrowdCalError as e:
        logger.error(f"Run {spec.run_id} failed: {e}")
        return RunOutcome(spec.run_id, None, float("nan"), str(e))
    trace = run.to_frame()
    trace.insert(0, "run_id", spec.run_id)
    trace.insert(1, "method", spec.config.method)
    trace.insert(2, "config_id", spec.config.config_id)
    trace.insert(3, "macroreplication", spec.macroreplication)
    return RunOutcome(spec.run_id, trace, post)


def _run_path(output_dir: str, run_id: str) -> str:
    return os.path.join(output_dir, "runs", f"{run_id}.csv")


def save_settings(settings: Settings, output_dir: str) -> str:
    path = os.path.join(output_dir, SETTINGS_FILE)
    with open(path, "w") as f:
        json.dump(settings.to_dict(), f, indent=2, sort_keys=True)
    return path


def load_sweep_settings(output_dir: str, fallback: Optional[Settings] = None) -> Settings:
    """Settings recorded by the sweep in ``output_dir``.

    Sweep directories without a snapshot fall back to ``fallback`` with a warning.

    Raises:
        MissingReferenceError: If there is neither a snapshot nor a fallback
    """
    path = os.path.join(output_dir, SETTINGS_FILE)
    if os.path.exists(path):
        with open(path) as f:
            return Settings.from_dict(json.load(f))
    if fallback is None:
        raise MissingReferenceError(f"No {SETTINGS_FILE} in {output_dir}")
    logger.warning(f"No {SETTINGS_FILE} in {output_dir}; replaying under the current settings")
    return fallback


def summarize(manifest: pd.DataFrame) -> pd.DataFrame:
    """Best configuration per method: argmin of the mean post objective over macroreplications."""
    done = manifest[manifest["status"] == "completed"]
    if done.empty:
        return pd.DataFrame(columns=["method", "config_id", "mean_post", "std_post", "runs", "hyperparameters"])
    grouped = (
        done.groupby(["method", "config_id"], sort=True)
        .agg(mean_post=("post_objective", "mean"), std_post=("post_objective", "std"),
             runs=("run_id", "count"), hyperparameters=("hyperparameters", "first"))
        .reset_index()
    )
    best = grouped.loc[grouped.groupby("method")["mean_post"].idxmin()]
    return best.sort_values("method").reset_index(drop=True)


def run_sweep(plan: SweepPlan, settings: Settings) -> SweepResult:
    """Execute every (configuration, macroreplication) run of a plan.

    Runs may execute in a process pool; only this process writes files.
    Failed runs are recorded in the manifest and the sweep continues.

    Raises:
        MissingReferenceError: If the scenario's reference file is unavailable
    """
    check_reference(plan.scenario, plan.reference_path, settings)
    specs = plan_runs(plan)
    os.makedirs(os.path.join(plan.output_dir, "runs"), exist_ok=True)
    save_settings(settings, plan.output_dir)
    logger.info(f"Sweep {plan.scenario}: {len(plan.configs)} configs x {plan.macroreplications} macroreplications")

    outcomes: Dict[str, RunOutcome] = {}
    progress = tqdm(total=len(specs), desc="sweep", disable=not plan.show_progress)

    def collect(outcome: RunOutcome) -> None:
        outcomes[outcome.run_id] = outcome
        if outcome.ok:
            outcome.trace.to_csv(_run_path(plan.output_dir, outcome.run_id), index=False)
        progress.update(1)

    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            futures = [pool.submit(execute_run, spec, settings) for spec in specs]
            for future in as_completed(futures):
                collect(future.result())
    else:
        for spec in specs:
            collect(execute_run(spec, settings))
    progress.close()

    rows = []
    for spec in specs:
        outcome = outcomes[spec.run_id]
        row = spec.manifest_row()
        row.update({
            "status": "completed" if outcome.ok else "failed",
            "post_objective": outcome.post_objective,
            "evaluations": int(outcome.trace["evaluations"].iloc[-1]) if outcome.ok else 0,
            "error": outcome.error or "",
        })
        rows.append(row)
    manifest = pd.DataFrame(rows)
    manifest.to_csv(os.path.join(plan.output_dir, "manifest.csv"), index=False)

    summary = summarize(manifest)
    summary.to_csv(os.path.join(plan.output_dir, "summary.csv"), index=False)

    failed = [r["run_id"] for r in rows if r["status"] == "failed"]
    if failed:
        logger.warning(f"{len(failed)} of {len(rows)} runs failed")
    for _, best in summary.iterrows():
        logger.info(f"Best {best['method']}: {best['config_id']} (mean post {best['mean_post']:.6g})")
    return SweepResult(plan.output_dir, manifest, summary, failed)


def compare_traces(stored: pd.DataFrame, replayed: pd.DataFrame) -> List[str]:
    """Columns (other than wall time) whose values differ between two traces."""
    if len(stored) != len(replayed):
        return [f"row count {len(stored)} != {len(replayed)}"]
    differing = []
    for column in stored.columns:
        if column in TRACE_COMPARE_EXCLUDE:
            continue
        if column not in replayed.columns:
            differing.append(column)
            continue
        a, b = stored[column].to_numpy(), replayed[column].to_numpy()
        if a.dtype.kind == "f" or b.dtype.kind == "f":
            same = np.array_equal(a.astype(float), b.astype(float), equal_nan=True)
        else:
            same = np.array_equal(a.astype(str), b.astype(str))
        if not same:
            differing.append(column)
    return differing


def replay(run_id: str, output_dir: str, settings: Optional[Settings] = None) -> Tuple[bool, List[str]]:
    """Re-execute a recorded run and compare it with its stored trace.

    The replay runs under the settings snapshot of the sweep; ``settings``
    is only used for directories written without one. It uses the recorded
    evaluation count as its budget and no wall limit, so a run stopped by
    wall time is reproduced step for step.

    Returns:
        (traces identical, differing columns)

    Raises:
        InvalidInputError: If the run id is not in the manifest
        MissingReferenceError: If the stored trace or the settings are missing
    """
    manifest_path = os.path.join(output_dir, "manifest.csv")
    if not os.path.exists(manifest_path):
        raise InvalidInputError(f"No manifest in {output_dir}")
    manifest = pd.read_csv(manifest_path, dtype={"seed": str, "reference_path": str})
    match = manifest[manifest["run_id"] == run_id]
    if match.empty:
        raise InvalidInputError(f"Run {run_id} not found in {manifest_path}")
    trace_path = _run_path(output_dir, run_id)
    if not os.path.exists(trace_path):
        raise MissingReferenceError(f"Stored trace not found: {trace_path}")

    settings = load_sweep_settings(output_dir, settings)
    stored = pd.read_csv(trace_path)
    spec = RunSpec.from_manifest_row(match.iloc[0].to_dict())
    budget = Budget(max_evaluations=int(stored["evaluations"].iloc[-1]), max_seconds=None)
    outcome = execute_run(spec, settings, budget)
    if not outcome.ok:
        return False, [f"replay failed: {outcome.error}"]

    replayed = pd.read_csv(_write_temp(outcome.trace, output_dir, run_id))
    differing = compare_traces(stored, replayed)
    if differing:
        logger.warning(f"Replay of {run_id} differs in {differing}")
    else:
        logger.info(f"Replay of {run_id} reproduced {len(stored)} trace rows")
    return not differing, differing


def _write_temp(trace: pd.DataFrame, output_dir: str, run_id: str) -> str:
    """Round-trip a trace through CSV so both sides compare at the same precision."""
    path = os.path.join(output_dir, "runs", f"{run_id}.replay.csv")
    trace.to_csv(path, index=False)
    return path
