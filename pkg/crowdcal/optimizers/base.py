"""Shared machinery of the calibration optimizers: problem, budget and trace."""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from crowdcal.ad import DualReal, TraceContext, constant_parameters
from crowdcal.estimators.types import ProgramHandle
from crowdcal.exceptions import CrowdCalError, InvalidConfigError, InvalidInputError
from crowdcal.seeds import derive_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Budget:
    """Search budget in simulated trajectories and (optionally) wall seconds."""
    max_evaluations: int = 5000
    max_seconds: Optional[float] = None

    def __post_init__(self):
        if self.max_evaluations < 0:
            raise InvalidConfigError(f"max_evaluations must be >= 0, got {self.max_evaluations}")

    def allows(self, used: int, cost: int, started: float) -> bool:
        """Whether a step costing ``cost`` evaluations still fits."""
        if used + cost > self.max_evaluations:
            return False
        if self.max_seconds is not None and time.perf_counter() - started >= self.max_seconds:
            return False
        return True


def replicated(program: ProgramHandle, microreplications: int) -> ProgramHandle:
    """Program averaging ``microreplications`` runs, each under its own trace scope.

    Replication r of sample seed s runs with seed ``derive_seed(s, (r,))``.
    """
    if microreplications < 1:
        raise InvalidConfigError(f"microreplications must be >= 1, got {microreplications}")
    if microreplications == 1:
        return program

    def averaged(params: DualReal, seed: int, ctx: TraceContext) -> DualReal:
        total = None
        for r in range(microreplications):
            with ctx.scope(f"rep{r}"):
                out = program(params, derive_seed(seed, (r,)), ctx)
            total = out if total is None else total + out
        return total * (1.0 / microreplications)

    return ProgramHandle(averaged, program.n, name=f"{program.name}x{microreplications}")


@dataclass
class CalibrationProblem:
    """A calibration program with box bounds, replication and crisp evaluation seeds."""
    program: ProgramHandle
    lower: np.ndarray
    upper: np.ndarray
    microreplications: int = 1
    crisp_seeds: Sequence[int] = (0, 1, 2, 3, 4)
    seed: int = 0

    def __post_init__(self):
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.program.n,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.program.n,)).copy()
        if np.any(self.lower > self.upper):
            raise InvalidInputError("Lower bounds must not exceed upper bounds")
        self.objective_program = replicated(self.program, self.microreplications)

    @property
    def n(self) -> int:
        return self.program.n

    def project(self, theta: Sequence[float]) -> np.ndarray:
        """Clamp to the bounds."""
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    def objective(self, theta: Sequence[float], seed: int) -> float:
        """One replicated plain evaluation; costs ``microreplications`` trajectories."""
        out = self.objective_program(constant_parameters(theta), seed, TraceContext(n=self.n))
        return float(out.value)

    def crisp(self, theta: Sequence[float]) -> float:
        """Mean unperturbed output over the fixed crisp seeds (not charged to the budget)."""
        params = constant_parameters(theta)
        values = [float(self.program(params, int(s), TraceContext(n=self.n)).value) for s in self.crisp_seeds]
        return float(np.mean(values))

    def safe_objective(self, theta: Sequence[float], seed: int) -> float:
        """Objective that maps failures to +inf with a warning."""
        try:
            value = self.objective(theta, seed)
        except CrowdCalError as e:
            logger.warning(f"Objective failed at {np.round(theta, 4).tolist()} (seed {seed}): {e}")
            return math.inf
        return value if math.isfinite(value) else math.inf


@dataclass
class TraceRow:
    step: int
    phase: str
    evaluations: int
    wall_ms: float
    objective: float
    crisp_objective: float
    best_crisp: float
    params: List[float]


@dataclass
class OptimizerRun:
    """Trace of one optimization run."""
    method: str
    hyperparameters: Dict[str, Any] = field(default_factory=dict)
    budget: Budget = field(default_factory=Budget)
    rows: List[TraceRow] = field(default_factory=list)

    def record(
        self,
        step: int,
        phase: str,
        evaluations: int,
        started: float,
        objective: float,
        params: Sequence[float],
        crisp: float,
    ) -> TraceRow:
        best = crisp if not self.rows else min(self.rows[-1].best_crisp, crisp)
        row = TraceRow(
            step=step,
            phase=phase,
            evaluations=evaluations,
            wall_ms=(time.perf_counter() - started) * 1000.0,
            objective=float(objective),
            crisp_objective=float(crisp),
            best_crisp=float(best),
            params=[float(p) for p in params],
        )
        self.rows.append(row)
        logger.debug(f"{self.method} step {step}: evals={evaluations} crisp={crisp:.6g} best={best:.6g}")
        return row

    @property
    def evaluations(self) -> int:
        return self.rows[-1].evaluations if self.rows else 0

    @property
    def best_crisp(self) -> float:
        return self.rows[-1].best_crisp if self.rows else math.inf

    @property
    def incumbent(self) -> np.ndarray:
        """Parameters of the latest recorded step."""
        return np.array(self.rows[-1].params) if self.rows else np.array([])

    def to_frame(self) -> pd.DataFrame:
        """Trace as a table with one ``p<i>`` column per parameter."""
        records = []
        for row in self.rows:
            record = {
                "step": row.step,
                "phase": row.phase,
                "evaluations": row.evaluations,
                "wall_ms": row.wall_ms,
                "objective": row.objective,
                "crisp_objective": row.crisp_objective,
                "best_crisp": row.best_crisp,
            }
            record.update({f"p{i}": p for i, p in enumerate(row.params)})
            records.append(record)
        return pd.DataFrame(records)
