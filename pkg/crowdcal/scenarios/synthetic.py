"""Small stochastic programs with known gradients, used by fidelity studies and tests.

Each program draws its noise omega from ``numpy.random.default_rng(seed)``.
"""
from typing import Sequence

import numpy as np
from scipy.stats import norm as normal

from crowdcal.ad import BranchSite, DualReal, TraceContext, traced_less_than
from crowdcal.estimators.types import ProgramHandle

STEP_SITE = BranchSite("synthetic.step")
SECOND_STEP_SITE = BranchSite("synthetic.second_step")


def _noise(seed: int, size: int = 1) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(size)


def quadratic(n: int = 1) -> ProgramHandle:
    """P = sum (theta_i + omega_i)^2; gradient 2 theta."""

    def program(params: DualReal, seed: int, ctx: TraceContext) -> DualReal:
        shifted = params + _noise(seed, n)
        return (shifted * shifted).sum()

    return ProgramHandle(program, n, name="quadratic")


def linear(n: int = 1) -> ProgramHandle:
    """P = sum theta_i + omega; gradient of ones."""

    def program(params: DualReal, seed: int, ctx: TraceContext) -> DualReal:
        return params.sum() + float(_noise(seed)[0])

    return ProgramHandle(program, n, name="linear")


def heaviside() -> ProgramHandle:
    """P = 1[theta + omega < 0]; E[P] = Phi(-theta), gradient -phi(theta)."""

    def program(params: DualReal, seed: int, ctx: TraceContext) -> DualReal:
        taken = traced_less_than(ctx, params[0] + float(_noise(seed)[0]), STEP_SITE)
        return DualReal.constant(1.0 if taken else 0.0, params.n)

    return ProgramHandle(program, 1, name="heaviside")


def two_branch() -> ProgramHandle:
    """P = 1[theta + omega_1 < 0] + 1[theta + omega_2 < 0] with independent omegas.

    Gradient -2 phi(theta). The second test is reached under either sign of the
    first, so path keying gives three branch keys.
    """

    def program(params: DualReal, seed: int, ctx: TraceContext) -> DualReal:
        omega = _noise(seed, 2)
        total = 0.0
        if traced_less_than(ctx, params[0] + float(omega[0]), STEP_SITE):
            total += 1.0
        if traced_less_than(ctx, params[0] + float(omega[1]), SECOND_STEP_SITE):
            total += 1.0
        return DualReal.constant(total, params.n)

    return ProgramHandle(program, 1, name="two-branch")


def product() -> ProgramHandle:
    """P = theta * omega; E[P] = 0 and every pathwise derivative is omega."""

    def program(params: DualReal, seed: int, ctx: TraceContext) -> DualReal:
        return params[0] * float(_noise(seed)[0])

    return ProgramHandle(program, 1, name="product")


def shifted_sphere(center: Sequence[float], noise: float = 0.0) -> ProgramHandle:
    """P = sum (theta - center)^2 + noise * omega; minimum at ``center``."""
    center = np.asarray(center, dtype=float)

    def program(params: DualReal, seed: int, ctx: TraceContext) -> DualReal:
        diff = params - center
        out = (diff * diff).sum()
        if noise:
            out = out + noise * float(_noise(seed)[0])
        return out

    return ProgramHandle(program, center.size, name="sphere")


def exact_gradient(name: str, theta: Sequence[float]) -> np.ndarray:
    """Closed-form gradient of E[P] for the synthetic programs."""
    theta = np.asarray(theta, dtype=float)
    if name == "quadratic":
        return 2.0 * theta
    if name == "linear":
        return np.ones_like(theta)
    if name == "heaviside":
        return -normal.pdf(theta)
    if name == "two-branch":
        return -2.0 * normal.pdf(theta)
    if name == "product":
        return np.zeros_like(theta)
    raise KeyError(f"No closed-form gradient for {name}")


SYNTHETIC_PROGRAMS = {
    "quadratic": quadratic,
    "linear": linear,
    "heaviside": heaviside,
    "two-branch": two_branch,
    "product": product,
}
