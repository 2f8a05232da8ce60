"""
Crowd calibration toolkit

Smoothed forward-mode differentiation of branching crowd simulations,
gradient estimators for programs with discontinuities, Social Force
calibration scenarios and the optimizers and harness to compare them.
"""

__version__ = '0.1.0'
