"""Fixed-support histograms, their 1-D Wasserstein distance and inverse-transform sampling."""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from crowdcal.ad import BranchSite, DualReal, TraceContext, absolute, maximum, traced_less_than
from crowdcal.exceptions import InvalidDistributionError, InvalidInputError

logger = logging.getLogger(__name__)

DEFAULT_BINS = 20

# one tracked site per candidate bin of an inverse-transform draw
COEFFICIENT_SITES = [BranchSite(f"coefficient.bin{k + 1}") for k in range(DEFAULT_BINS)]


@dataclass
class Histogram20:
    """Bin weights over a fixed, equally spaced support.

    ``support`` holds the value represented by each bin: the coefficient for
    input histograms, the bin centre for output histograms. Weights are kept
    raw; ``normalized`` gives the probability view.
    """
    weights: DualReal
    support: np.ndarray

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=float)
        if self.weights.shape != self.support.shape or self.support.ndim != 1:
            raise InvalidInputError(
                f"Weights {self.weights.shape} and support {self.support.shape} must be matching vectors"
            )
        if self.support.size < 2:
            raise InvalidInputError("A histogram needs at least 2 bins")

    @classmethod
    def coefficients(
        cls, weights: Union[DualReal, Sequence[float]], low: float = 0.1, high: float = 1.0
    ) -> "Histogram20":
        """Input histogram over coefficients ``low + i (high - low) / (bins - 1)``."""
        weights = _as_dual(weights)
        return cls(weights, np.linspace(low, high, weights.shape[0]))

    @classmethod
    def evacuation_times(
        cls, weights: Union[DualReal, Sequence[float]], low: float = 10.0, high: float = 75.0
    ) -> "Histogram20":
        """Output histogram over equal-width time bins on [low, high]; support = bin centres."""
        weights = _as_dual(weights)
        edges = np.linspace(low, high, weights.shape[0] + 1)
        return cls(weights, 0.5 * (edges[:-1] + edges[1:]))

    @classmethod
    def from_samples(
        cls, values: Sequence[float], n: int, bins: int = DEFAULT_BINS, low: float = 10.0, high: float = 75.0
    ) -> "Histogram20":
        """Count histogram of ``values``; values outside [low, high] land in the edge bins, NaN in the last."""
        values = np.asarray(values, dtype=float)
        width = (high - low) / bins
        index = np.full(values.shape, bins - 1)
        finite = np.isfinite(values)
        index[finite] = np.clip(np.floor((values[finite] - low) / width), 0, bins - 1).astype(int)
        counts = np.bincount(index, minlength=bins).astype(float)
        return cls.evacuation_times(DualReal.constant(counts, n), low, high)

    @property
    def bins(self) -> int:
        return int(self.support.size)

    @property
    def bin_width(self) -> float:
        return float(self.support[1] - self.support[0])

    @property
    def n(self) -> int:
        return self.weights.n

    def normalized(self, min_weight: float = 0.0) -> DualReal:
        """Probabilities per bin.

        Args:
            min_weight: If positive, raw weights are clamped to at least this value first

        Raises:
            InvalidDistributionError: If the weights are non-finite, negative
                (without clamping) or all zero
        """
        raw = np.asarray(self.weights.value)
        if not np.all(np.isfinite(raw)):
            raise InvalidDistributionError("Histogram weights must be finite")
        if not np.any(raw > 0.0):
            raise InvalidDistributionError("Histogram weights are all zero or negative")
        weights = self.weights
        if min_weight > 0.0:
            weights = maximum(weights, min_weight)
        elif np.any(raw < 0.0):
            raise InvalidDistributionError("Histogram weights must be nonnegative")
        return weights / weights.sum()

    def mean(self) -> DualReal:
        """Expected support value under the normalized weights."""
        return (self.normalized() * self.support).sum()


def _as_dual(weights: Union[DualReal, Sequence[float]]) -> DualReal:
    if isinstance(weights, DualReal):
        return weights
    values = np.asarray(weights, dtype=float)
    return DualReal.constant(values, values.size)


def wasserstein_1d(a: Histogram20, b: Histogram20) -> DualReal:
    """Earth mover's distance between two histograms on the same support.

    Computed as bin width times the summed absolute difference of the
    cumulative distributions.

    Raises:
        InvalidInputError: If supports differ
        InvalidDistributionError: If either histogram cannot be normalized
    """
    if a.bins != b.bins or not np.allclose(a.support, b.support):
        raise InvalidInputError("Histograms must share their support")
    difference = (a.normalized() - b.normalized()).cumsum()
    return absolute(difference).sum() * a.bin_width


def sample_coefficient(
    ctx: Optional[TraceContext],
    u: float,
    bins: Histogram20,
    min_weight: float = 0.0,
) -> DualReal:
    """Draw a coefficient by inverse transform sampling.

    Bin k is chosen at the first k with ``u - sum_{j<=k} p_j < 0``; each
    comparison is a tracked branch, so the parameters influence the draw
    only through branch conditions. The returned coefficient is a constant.

    Args:
        ctx: Trace context of the running sample
        u: Uniform variate in [0, 1)
        bins: Input histogram (raw weights)
        min_weight: Clamp applied to raw weights before normalizing

    Raises:
        InvalidInputError: If u is outside [0, 1)
        InvalidDistributionError: If the weights cannot be normalized
    """
    if not 0.0 <= u < 1.0:
        raise InvalidInputError(f"Uniform variate must be in [0, 1), got {u}")
    if bins.bins > len(COEFFICIENT_SITES):
        raise InvalidInputError(f"At most {len(COEFFICIENT_SITES)} bins supported, got {bins.bins}")
    cumulative = bins.normalized(min_weight).cumsum()
    for k in range(bins.bins):
        if traced_less_than(ctx, u - cumulative[k], COEFFICIENT_SITES[k]):
            return DualReal.constant(bins.support[k], bins.n)
    # u above the rounded total
    return DualReal.constant(bins.support[-1], bins.n)
