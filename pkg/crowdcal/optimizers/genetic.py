"""Generational real-valued genetic algorithm.

Tournament selection of size 2, single-point crossover, per-gene mutation
with probability 1/n and optional elitism. The elite is carried over with
its evaluation seed, so re-evaluating it reproduces its fitness.
"""
import logging
import time
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from crowdcal.exceptions import InvalidConfigError
from crowdcal.seeds import derive_seed, generator
from crowdcal.optimizers.base import Budget, CalibrationProblem, OptimizerRun

logger = logging.getLogger(__name__)

MUTATIONS = ("replace", "additive")


@dataclass(frozen=True)
class GAConfig:
    population: int = 10
    elitism: bool = True
    mutation: str = "replace"
    crossover_rate: float = 0.8
    mutation_scale: float = 0.1
    tournament: int = 2

    def __post_init__(self):
        if self.population < 2:
            raise InvalidConfigError(f"GA needs a population of at least 2, got {self.population}")
        if self.mutation not in MUTATIONS:
            raise InvalidConfigError(f"Unknown mutation {self.mutation!r}, expected one of {MUTATIONS}")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise InvalidConfigError(f"crossover_rate must be in [0, 1], got {self.crossover_rate}")
        if self.tournament < 1:
            raise InvalidConfigError(f"tournament size must be >= 1, got {self.tournament}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "population": self.population,
            "elitism": self.elitism,
            "mutation": self.mutation,
            "crossover_rate": self.crossover_rate,
        }


def tournament_select(fitness: np.ndarray, size: int, rng: np.random.Generator) -> int:
    """Index of the fittest among ``size`` uniformly drawn contestants."""
    contestants = rng.integers(0, len(fitness), size=size)
    return int(contestants[np.argmin(fitness[contestants])])


def crossover(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Single-point crossover; genomes of length 1 are returned unchanged."""
    if a.size < 2:
        return a.copy(), b.copy()
    point = int(rng.integers(1, a.size))
    return np.concatenate([a[:point], b[point:]]), np.concatenate([b[:point], a[point:]])


def mutate(genome: np.ndarray, problem: CalibrationProblem, cfg: GAConfig, rng: np.random.Generator) -> np.ndarray:
    """Mutate each gene with probability 1/n, then clamp to the bounds."""
    mask = rng.random(genome.size) < 1.0 / genome.size
    child = genome.copy()
    if cfg.mutation == "replace":
        child[mask] = rng.uniform(problem.lower[mask], problem.upper[mask])
    else:
        child[mask] += rng.normal(0.0, cfg.mutation_scale, size=int(mask.sum()))
    return problem.project(child)


def genetic_algorithm(problem: CalibrationProblem, cfg: GAConfig, budget: Budget) -> OptimizerRun:
    """Evolve a population until the budget is spent.

    Each generation costs ``population * microreplications``; the initial
    population is always evaluated. The trace records the best individual of
    every generation.
    """
    started = time.perf_counter()
    run = OptimizerRun("ga", cfg.to_dict(), budget)
    rng = generator(problem.seed, 0)
    cost = cfg.population * problem.microreplications

    population = rng.uniform(problem.lower, problem.upper, size=(cfg.population, problem.n))
    seeds = np.array([derive_seed(problem.seed, (0, i)) for i in range(cfg.population)], dtype=np.uint64)
    fitness = np.array([problem.safe_objective(x, int(s)) for x, s in zip(population, seeds)])
    used = cost
    lead = int(np.argmin(fitness))
    run.record(0, "init", used, started, fitness[lead], population[lead], problem.crisp(population[lead]))

    generation = 0
    while budget.allows(used, cost, started):
        generation += 1
        children = []
        while len(children) < cfg.population:
            a = population[tournament_select(fitness, cfg.tournament, rng)]
            b = population[tournament_select(fitness, cfg.tournament, rng)]
            if rng.random() < cfg.crossover_rate:
                a, b = crossover(a, b, rng)
            children.append(mutate(a, problem, cfg, rng))
            children.append(mutate(b, problem, cfg, rng))
        offspring = np.array(children[: cfg.population])
        offspring_seeds = np.array(
            [derive_seed(problem.seed, (generation, i)) for i in range(cfg.population)], dtype=np.uint64
        )
        if cfg.elitism:
            elite = int(np.argmin(fitness))
            offspring[0] = population[elite]
            offspring_seeds[0] = seeds[elite]

        population, seeds = offspring, offspring_seeds
        fitness = np.array([problem.safe_objective(x, int(s)) for x, s in zip(population, seeds)])
        used += cost

        lead = int(np.argmin(fitness))
        run.record(generation, "search", used, started, fitness[lead], population[lead], problem.crisp(population[lead]))

    logger.debug(f"GA finished after {generation} generations, best {fitness.min():.6g}")
    return run
