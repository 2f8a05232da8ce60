"""Sampling-based gradient estimators for stochastic programs with branches.

IPA averages pathwise (forward-mode) derivatives. DGO adds, for every
branch key observed with conditions of both signs, the jump term

    (P(w+) - P(w-)) * lambda_b * f_hat_b(0) * dC_b/dtheta

where w+ / w- are the samples with the smallest positive and largest
negative condition value, lambda_b the fraction of samples that reached the
branch and f_hat_b a Gaussian KDE of the condition values. PGO is the
randomized finite-difference estimator with Gaussian perturbations and
common random numbers inside each pair.
"""
import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from crowdcal.ad import BranchRegistry, TraceContext, TraceMode, constant_parameters, seed_parameters
from crowdcal.estimators.kde import kde_at_zero
from crowdcal.estimators.types import (
    BranchContribution,
    EstimatorConfig,
    EstimatorKind,
    GradientEstimate,
    ProgramHandle,
)
from crowdcal.exceptions import EstimationError, InsufficientDataError, InvalidConfigError, InvalidInputError
from crowdcal.seeds import derive_seed

logger = logging.getLogger(__name__)

# spawn-key namespaces for the two random streams of one estimate
_SAMPLE_STREAM = 0
_PERTURBATION_STREAM = 1


def sample_seeds(cfg: EstimatorConfig) -> List[int]:
    """Program seeds omega_s of one estimate."""
    return [derive_seed(cfg.seed, (_SAMPLE_STREAM, s)) for s in range(cfg.samples)]


def perturbations(cfg: EstimatorConfig, n: int) -> np.ndarray:
    """Standard normal perturbation directions u_s, shape (S, n)."""
    rng = np.random.default_rng(derive_seed(cfg.seed, (_PERTURBATION_STREAM,)))
    return rng.standard_normal((cfg.samples, n))


def _check_theta(prog: ProgramHandle, theta: Sequence[float]) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (prog.n,):
        raise InvalidInputError(f"{prog.name} expects {prog.n} parameters, got shape {theta.shape}")
    return theta


def _run_pathwise(
    prog: ProgramHandle,
    theta: np.ndarray,
    cfg: EstimatorConfig,
    mode: TraceMode,
    registry: Optional[BranchRegistry] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Execute S differentiated samples at theta + sigma * u_s.

    Returns:
        (output values, shape (S,); output tangents, shape (S, n))
    """
    seeds = sample_seeds(cfg)
    u = perturbations(cfg, prog.n)
    values = np.empty(cfg.samples)
    tangents = np.empty((cfg.samples, prog.n))

    for s, seed in enumerate(seeds):
        ctx = TraceContext(mode=mode, registry=registry, sample_id=s, n=prog.n)
        params = seed_parameters(theta + cfg.sigma * u[s])
        out = prog(params, seed, ctx)
        if not out.is_finite():
            raise EstimationError(f"Non-finite output from {prog.name}", seed=seed)
        values[s] = float(out.value)
        tangents[s] = out.tangent

    return values, tangents


def estimate_ipa(prog: ProgramHandle, theta: Sequence[float], cfg: EstimatorConfig) -> GradientEstimate:
    """Average of pathwise derivatives over S samples.

    Raises:
        InvalidConfigError: If cfg.mode is not IPA
        EstimationError: If a sample output is not finite
    """
    if cfg.mode != EstimatorKind.IPA:
        raise InvalidConfigError(f"estimate_ipa needs mode IPA, got {cfg.mode.value}")
    theta = _check_theta(prog, theta)
    values, tangents = _run_pathwise(prog, theta, cfg, TraceMode.IPA)
    pathwise = tangents.mean(axis=0)
    return GradientEstimate(
        gradient=pathwise.copy(),
        mean_output=float(values.mean()),
        samples=cfg.samples,
        evaluations=cfg.samples,
        kind=EstimatorKind.IPA,
        pathwise=pathwise,
    )


def estimate_dgo(prog: ProgramHandle, theta: Sequence[float], cfg: EstimatorConfig) -> GradientEstimate:
    """Pathwise mean plus per-branch jump corrections.

    HYBRID mode records tracked sites only, so passthrough branches inside
    the mobility model contribute their pathwise derivative and nothing else.

    Raises:
        InvalidConfigError: If cfg.mode is not DGO or HYBRID
        EstimationError: If a sample output is not finite
    """
    if cfg.mode not in (EstimatorKind.DGO, EstimatorKind.HYBRID):
        raise InvalidConfigError(f"estimate_dgo needs mode DGO or HYBRID, got {cfg.mode.value}")
    theta = _check_theta(prog, theta)
    mode = TraceMode.DGO if cfg.mode == EstimatorKind.DGO else TraceMode.HYBRID
    registry = BranchRegistry(cap=cfg.registry_cap)
    values, tangents = _run_pathwise(prog, theta, cfg, mode, registry)
    pathwise = tangents.mean(axis=0)

    contributions = branch_contributions(registry, values, cfg)
    gradient = pathwise.copy()
    for c in contributions:
        gradient = gradient + c.contribution

    if registry.truncated:
        logger.warning(f"DGO estimate for {prog.name} truncated: {registry.dropped} branch encounters dropped")

    return GradientEstimate(
        gradient=gradient,
        mean_output=float(values.mean()),
        samples=cfg.samples,
        evaluations=cfg.samples,
        kind=cfg.mode,
        pathwise=pathwise,
        contributions=contributions,
        branch_keys=len(registry),
        truncated=registry.truncated,
        skipped_keys=len(registry) - len(contributions),
        degenerate_kde=sum(1 for c in contributions if c.density == 0.0),
    )


def branch_contributions(
    registry: BranchRegistry, outputs: np.ndarray, cfg: EstimatorConfig
) -> List[BranchContribution]:
    """Jump terms for every branch key observed with both condition signs."""
    contributions = []
    for record in registry.records():
        conditions = record.condition_values()
        positive = conditions >= 0.0
        negative = ~positive
        if conditions.size < 2 or not positive.any() or not negative.any():
            continue

        pos_idx = np.flatnonzero(positive)
        neg_idx = np.flatnonzero(negative)
        obs_plus = record.observations[pos_idx[np.argmin(conditions[pos_idx])]]
        obs_minus = record.observations[neg_idx[np.argmax(conditions[neg_idx])]]

        try:
            density = kde_at_zero(conditions, cfg.bandwidth)
        except InsufficientDataError as e:
            logger.debug(f"Skipping branch {record.site}: {e}")
            continue

        delta = float(outputs[obs_plus.sample_id] - outputs[obs_minus.sample_id])
        reach = record.reach_count / cfg.samples
        d_condition = 0.5 * (obs_plus.tangent + obs_minus.tangent)
        contributions.append(
            BranchContribution(
                key=record.key.signature,
                site=record.site,
                delta=delta,
                reach_fraction=reach,
                density=density,
                condition_gradient=d_condition,
                contribution=delta * reach * density * d_condition,
            )
        )
    return contributions


def estimate_pgo(prog: ProgramHandle, theta: Sequence[float], cfg: EstimatorConfig) -> GradientEstimate:
    """Gaussian-smoothing finite differences; each pair shares its seed.

    Raises:
        InvalidConfigError: If cfg.mode is not PGO or sigma is zero
        EstimationError: If a sample output is not finite
    """
    if cfg.mode != EstimatorKind.PGO:
        raise InvalidConfigError(f"estimate_pgo needs mode PGO, got {cfg.mode.value}")
    if cfg.sigma <= 0:
        raise InvalidConfigError("PGO needs sigma > 0")
    theta = _check_theta(prog, theta)
    seeds = sample_seeds(cfg)
    u = perturbations(cfg, prog.n)

    gradient = np.zeros(prog.n)
    base_values = np.empty(cfg.samples)
    for s, seed in enumerate(seeds):
        perturbed = prog(constant_parameters(theta + cfg.sigma * u[s]), seed, TraceContext(n=prog.n, sample_id=s))
        base = prog(constant_parameters(theta), seed, TraceContext(n=prog.n, sample_id=s))
        if not (np.isfinite(perturbed.value) and np.isfinite(base.value)):
            raise EstimationError(f"Non-finite output from {prog.name}", seed=seed)
        base_values[s] = float(base.value)
        gradient += (float(perturbed.value) - float(base.value)) / cfg.sigma * u[s]

    return GradientEstimate(
        gradient=gradient / cfg.samples,
        mean_output=float(base_values.mean()),
        samples=cfg.samples,
        evaluations=2 * cfg.samples,
        kind=EstimatorKind.PGO,
    )


def estimate(prog: ProgramHandle, theta: Sequence[float], cfg: EstimatorConfig) -> GradientEstimate:
    """Dispatch to the estimator named by cfg.mode."""
    if cfg.mode == EstimatorKind.IPA:
        return estimate_ipa(prog, theta, cfg)
    if cfg.mode == EstimatorKind.PGO:
        return estimate_pgo(prog, theta, cfg)
    return estimate_dgo(prog, theta, cfg)


def reference_gradient(
    prog: ProgramHandle,
    theta: Sequence[float],
    samples: int = 10000,
    sigma: float = 0.01,
    seed: int = 0,
) -> np.ndarray:
    """High-sample PGO estimate used as ground truth in fidelity studies."""
    cfg = EstimatorConfig(samples=samples, sigma=sigma, mode=EstimatorKind.PGO, seed=seed)
    return estimate_pgo(prog, theta, cfg).gradient


def gradient_mae(
    estimates: Sequence[Union[GradientEstimate, Sequence[float]]],
    references: Sequence[Sequence[float]],
    coordinate: Optional[int] = None,
) -> float:
    """Mean absolute error of a sweep of estimates against reference gradients.

    Args:
        estimates: One estimate (or raw gradient) per sweep point
        references: One reference gradient per sweep point
        coordinate: Restrict to one parameter coordinate; None averages all

    Raises:
        InvalidInputError: If the sweeps differ in length or are empty
    """
    if len(estimates) != len(references):
        raise InvalidInputError(f"Sweep lengths differ: {len(estimates)} vs {len(references)}")
    if len(estimates) == 0:
        raise InvalidInputError("Empty sweep")
    est = np.array([e.gradient if isinstance(e, GradientEstimate) else e for e in estimates], dtype=float)
    ref = np.array(references, dtype=float)
    est = est.reshape(len(estimates), -1)
    ref = ref.reshape(len(references), -1)
    if coordinate is not None:
        est, ref = est[:, coordinate], ref[:, coordinate]
    return float(np.mean(np.abs(est - ref)))
