"""Exceptions used across the calibration toolkit.

This module defines the custom exceptions raised by the AD core, the
gradient estimators, the crowd simulation and the experiment harness.
"""
from typing import Optional


class CrowdCalError(Exception):
    """Base class for all toolkit errors."""
    pass


class InvalidDimensionError(CrowdCalError):
    """Exception raised when a parameter vector has an unusable dimension."""
    pass


class DualArithmeticError(CrowdCalError, ArithmeticError):
    """Exception raised for undefined dual-number arithmetic."""

    def __init__(self, message: str, site: Optional[str] = None):
        self.site = site
        if site:
            message = f"{message} (at {site})"
        super().__init__(message)


class TraceError(CrowdCalError):
    """Exception raised when a traced branch condition cannot be recorded."""

    def __init__(self, message: str, sample_id: Optional[int] = None, site: Optional[str] = None):
        self.sample_id = sample_id
        self.site = site
        super().__init__(f"{message} (sample {sample_id}, site {site})")


class EstimationError(CrowdCalError):
    """Exception raised when a gradient estimate cannot be formed."""

    def __init__(self, message: str, seed: Optional[int] = None):
        self.seed = seed
        if seed is not None:
            message = f"{message} (seed {seed})"
        super().__init__(message)


class InsufficientDataError(CrowdCalError):
    """Exception raised when a density estimate has too few observations."""
    pass


class InvalidConfigError(CrowdCalError):
    """Exception raised for an estimator or optimizer configuration that cannot run."""
    pass


class InvalidInputError(CrowdCalError):
    """Exception raised for malformed inputs such as mismatched sweep lengths."""
    pass


class SimulationError(CrowdCalError):
    """Exception raised when the crowd simulation reaches a non-finite state."""

    def __init__(self, message: str, agent: Optional[int] = None, step: Optional[int] = None):
        self.agent = agent
        self.step = step
        super().__init__(f"{message} (agent {agent}, step {step})")


class InvalidDistributionError(CrowdCalError):
    """Exception raised when histogram weights cannot be normalized."""
    pass


class ConfigError(CrowdCalError):
    """Exception raised for unreadable or unknown configuration keys."""
    pass


class MissingReferenceError(CrowdCalError):
    """Exception raised when a calibration reference file is unavailable."""
    pass
