"""Inertia-weight particle swarm optimization with a ring neighbourhood."""
import logging
import time
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple, Union

import numpy as np
from scipy.stats import qmc

from crowdcal.exceptions import InvalidConfigError
from crowdcal.seeds import derive_seed, generator
from crowdcal.optimizers.base import Budget, CalibrationProblem, OptimizerRun

logger = logging.getLogger(__name__)

# sampling ranges of (cognitive c1, social c2, inertia w)
COEFFICIENT_BOUNDS = ((0.5, 2.5), (0.5, 2.5), (0.4, 0.9))


@dataclass(frozen=True)
class PSOConfig:
    particles: int = 10
    cognitive: float = 1.49445
    social: float = 1.49445
    inertia: float = 0.729
    neighbors: Union[int, str] = 3

    def __post_init__(self):
        if self.particles < 2:
            raise InvalidConfigError(f"PSO needs at least 2 particles, got {self.particles}")
        if self.neighbors != "all" and not (isinstance(self.neighbors, int) and self.neighbors >= 1):
            raise InvalidConfigError(f"neighbors must be a positive int or 'all', got {self.neighbors!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "particles": self.particles,
            "cognitive": self.cognitive,
            "social": self.social,
            "inertia": self.inertia,
            "neighbors": self.neighbors,
        }


def lhs_coefficients(points: int = 10, seed: int = 0) -> List[Tuple[float, float, float]]:
    """Latin hypercube sample of (c1, c2, w) triples."""
    sample = qmc.LatinHypercube(d=3, seed=seed).random(points)
    low = [b[0] for b in COEFFICIENT_BOUNDS]
    high = [b[1] for b in COEFFICIENT_BOUNDS]
    scaled = qmc.scale(sample, low, high)
    return [tuple(float(v) for v in row) for row in scaled]


def ring_offsets(neighbors: int) -> np.ndarray:
    """Index offsets of a ring neighbourhood of the given size (self included)."""
    return np.arange(-(neighbors // 2), neighbors - neighbors // 2)


def neighborhood_best(best_x: np.ndarray, best_f: np.ndarray, neighbors: Union[int, str]) -> np.ndarray:
    """Best personal-best position within each particle's neighbourhood."""
    count = len(best_f)
    if neighbors == "all" or neighbors >= count:
        return np.repeat(best_x[np.argmin(best_f)][None], count, axis=0)
    ring = (np.arange(count)[:, None] + ring_offsets(neighbors)[None]) % count
    winner = ring[np.arange(count), np.argmin(best_f[ring], axis=1)]
    return best_x[winner]


def pso(problem: CalibrationProblem, cfg: PSOConfig, budget: Budget) -> OptimizerRun:
    """Minimize the problem's objective with a particle swarm.

    The initial swarm is always evaluated; afterwards every step evaluates
    each particle once, so a step costs ``particles * microreplications``.
    Velocities are clamped to the bound range, positions to the bounds.
    A failed evaluation counts as +inf and the particle keeps its best.
    """
    started = time.perf_counter()
    run = OptimizerRun("pso", cfg.to_dict(), budget)
    rng = generator(problem.seed, 0)
    span = problem.upper - problem.lower
    cost = cfg.particles * problem.microreplications

    def evaluate(positions: np.ndarray, step: int) -> np.ndarray:
        return np.array([
            problem.safe_objective(x, derive_seed(problem.seed, (step, i))) for i, x in enumerate(positions)
        ])

    x = rng.uniform(problem.lower, problem.upper, size=(cfg.particles, problem.n))
    v = np.zeros_like(x)
    f = evaluate(x, 0)
    used = cost
    best_x, best_f = x.copy(), f.copy()
    lead = int(np.argmin(best_f))
    run.record(0, "init", used, started, best_f[lead], best_x[lead], problem.crisp(best_x[lead]))

    step = 0
    while budget.allows(used, cost, started):
        step += 1
        local = neighborhood_best(best_x, best_f, cfg.neighbors)
        r1 = rng.random(x.shape)
        r2 = rng.random(x.shape)
        v = cfg.inertia * v + cfg.cognitive * r1 * (best_x - x) + cfg.social * r2 * (local - x)
        v = np.clip(v, -span, span)
        x = problem.project(x + v)

        f = evaluate(x, step)
        used += cost
        improved = f < best_f
        best_x[improved] = x[improved]
        best_f[improved] = f[improved]

        lead = int(np.argmin(best_f))
        run.record(step, "search", used, started, best_f[lead], best_x[lead], problem.crisp(best_x[lead]))

    logger.debug(f"PSO finished after {step} steps, best {best_f.min():.6g}")
    return run
