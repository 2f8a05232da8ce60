"""Experiment harness: seeds, plans, sweeps, fidelity studies and replay."""
from crowdcal.seeds import derive_seed, generator
from crowdcal.harness.plans import (
    DESK_GRID,
    FULL_GRID,
    METHODS,
    SCENARIOS,
    FidelityPlan,
    MethodConfig,
    SweepPlan,
    build_grid,
)
from crowdcal.harness.problems import build_problem, check_reference, scenario_program
from crowdcal.harness.sweep import RunSpec, SweepResult, execute_run, plan_runs, replay, run_sweep, summarize
from crowdcal.harness.fidelity import FidelityResult, count_jumps, run_fidelity
