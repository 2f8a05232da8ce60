"""Gaussian kernel density estimate of branch conditions at the origin."""
import logging
from typing import Sequence, Union

import numpy as np
from scipy.stats import norm

from crowdcal.exceptions import InsufficientDataError

logger = logging.getLogger(__name__)


def silverman_bandwidth(values: np.ndarray) -> float:
    """Rule-of-thumb bandwidth 1.06 * std * m^(-1/5)."""
    return 1.06 * float(np.std(values, ddof=1)) * len(values) ** (-0.2)


def kde_at_zero(values: Sequence[float], bandwidth: Union[str, float] = "silverman") -> float:
    """Estimate the density of the sampled conditions at zero.

    Args:
        values: Condition realizations (at least two, finite)
        bandwidth: "silverman" or a fixed positive bandwidth

    Returns:
        Density estimate at 0; 0.0 for zero-variance data under the rule of
        thumb or when every kernel underflows (both logged)

    Raises:
        InsufficientDataError: If fewer than two values are given
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise InsufficientDataError(f"Density estimate needs at least 2 values, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise InsufficientDataError("Density estimate got non-finite values")

    spread = float(np.std(values, ddof=1))
    if bandwidth == "silverman":
        if spread == 0.0:
            logger.warning(f"Degenerate condition data ({values.size} identical values); density taken as 0")
            return 0.0
        h = silverman_bandwidth(values)
    else:
        h = float(bandwidth)
        if spread == 0.0:
            logger.warning(f"Degenerate condition data ({values.size} identical values) under fixed bandwidth {h:.4g}")
        else:
            logger.debug(f"Fixed bandwidth {h:.4g}; the rule of thumb would give {silverman_bandwidth(values):.4g}")

    density = float(np.mean(norm.pdf(-values / h)) / h)
    if density == 0.0:
        nearest = float(np.min(np.abs(values)))
        logger.warning(f"Density at 0 underflows with bandwidth {h:.4g} (nearest condition {nearest:.4g}); taken as 0")
    return density
