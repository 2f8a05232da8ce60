"""Search procedures for simulation calibration: gradient descent, PSO and GA."""
from crowdcal.optimizers.base import Budget, CalibrationProblem, OptimizerRun, TraceRow, replicated
from crowdcal.optimizers.gradient_descent import GDConfig, LEARNING_RATES, gradient_descent
from crowdcal.optimizers.pso import PSOConfig, lhs_coefficients, neighborhood_best, pso, ring_offsets
from crowdcal.optimizers.genetic import GAConfig, crossover, genetic_algorithm, mutate, tournament_select
