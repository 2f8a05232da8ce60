"""Instrumented branching for discontinuity-aware gradient estimation.

Branch conditions are written as ``C < 0``. In DGO mode (and in HYBRID mode
at tracked sites) every evaluation of a condition is recorded under a key
made of the control-flow path that led to it and the static site id, so
that the estimators can form per-branch density and jump estimates.
"""
import hashlib
import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from crowdcal.ad.dual import DualReal
from crowdcal.exceptions import TraceError

logger = logging.getLogger(__name__)

DEFAULT_REGISTRY_CAP = 10000


class TraceMode(str, Enum):
    """How branch conditions are handled during one program execution."""
    PLAIN = "plain"
    IPA = "ipa"
    DGO = "dgo"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class BranchSite:
    """A static branch location.

    Passthrough sites (``tracked=False``) are recorded in DGO mode only; in
    HYBRID mode they behave as plain comparisons.
    """
    name: str
    tracked: bool = True


@dataclass(frozen=True)
class PathKey:
    """Order-sensitive digest of the (site, sign) sequence seen so far in a sample."""
    signature: str

    @classmethod
    def root(cls, label: str = "") -> "PathKey":
        return cls(_digest(b"root", label.encode()))

    def extend(self, site: str, negative: bool) -> "PathKey":
        return PathKey(_digest(self.signature.encode(), site.encode(), b"-" if negative else b"+"))

    def nest(self, label: str) -> "PathKey":
        return PathKey(_digest(self.signature.encode(), b"scope", label.encode()))


def _digest(*parts: bytes) -> str:
    h = hashlib.blake2b(digest_size=16)
    for part in parts:
        h.update(len(part).to_bytes(4, "little"))
        h.update(part)
    return h.hexdigest()


@dataclass(frozen=True)
class BranchObservation:
    """One realization of a branch condition."""
    sample_id: int
    value: float
    tangent: np.ndarray
    taken: bool


@dataclass
class BranchRecord:
    """All observations of one branch site reached along one control-flow path."""
    key: PathKey
    site: str
    observations: List[BranchObservation] = field(default_factory=list)

    @property
    def reach_count(self) -> int:
        """Number of distinct samples that encountered this branch."""
        return len({obs.sample_id for obs in self.observations})

    def condition_values(self) -> np.ndarray:
        return np.array([obs.value for obs in self.observations], dtype=float)


class BranchRegistry:
    """Mapping (PathKey, site) -> BranchRecord shared by the samples of one estimate.

    Appends are guarded by a lock so samples may run concurrently; registries
    filled by separate workers can be combined with ``merge``.
    """

    def __init__(self, cap: int = DEFAULT_REGISTRY_CAP):
        self.cap = cap
        self._records: Dict[Tuple[str, str], BranchRecord] = {}
        self._lock = threading.Lock()
        self.dropped = 0

    def observe(self, key: PathKey, site: str, observation: BranchObservation) -> None:
        """Append an observation, creating the record if the cap allows."""
        with self._lock:
            record = self._records.get((key.signature, site))
            if record is None:
                if len(self._records) >= self.cap:
                    if self.dropped == 0:
                        logger.warning(f"Branch registry full ({self.cap} keys); further keys are dropped")
                    self.dropped += 1
                    return
                record = BranchRecord(key=key, site=site)
                self._records[(key.signature, site)] = record
            record.observations.append(observation)

    def merge(self, other: "BranchRegistry") -> None:
        """Fold another registry's observations into this one."""
        for record in other.records():
            for obs in record.observations:
                self.observe(record.key, record.site, obs)
        self.dropped += other.dropped

    @property
    def truncated(self) -> bool:
        return self.dropped > 0

    def records(self) -> List[BranchRecord]:
        """Records in a deterministic order (site, then path signature)."""
        return [self._records[k] for k in sorted(self._records, key=lambda k: (k[1], k[0]))]

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[BranchRecord]:
        return iter(self.records())


class TraceContext:
    """Per-sample tracing state; the registry is shared across samples."""

    def __init__(
        self,
        mode: TraceMode = TraceMode.PLAIN,
        registry: Optional[BranchRegistry] = None,
        sample_id: int = 0,
        n: int = 1,
    ):
        self.mode = TraceMode(mode)
        self.registry = registry if registry is not None else BranchRegistry()
        self.sample_id = sample_id
        self.n = n
        self.path = PathKey.root()

    def records(self, site: BranchSite) -> bool:
        """Whether a branch at this site is recorded in the current mode."""
        if self.mode == TraceMode.DGO:
            return True
        if self.mode == TraceMode.HYBRID:
            return site.tracked
        return False

    @contextmanager
    def scope(self, label: str) -> Iterator["TraceContext"]:
        """Evaluate a block under a nested path prefix, restoring the path afterwards."""
        saved = self.path
        self.path = saved.nest(label)
        try:
            yield self
        finally:
            self.path = saved


def traced_less_than(ctx: Optional[TraceContext], condition: Any, site: BranchSite) -> Any:
    """Evaluate ``condition < 0`` and record it when the context traces this site.

    Array conditions are treated as a sequence of branch encounters in C order.

    Args:
        ctx: Trace context of the running sample (None behaves as PLAIN)
        condition: DualReal (or plain number) condition value C
        site: Static branch site

    Returns:
        bool for scalar conditions, boolean ndarray for array conditions

    Raises:
        TraceError: If any condition value is not finite
    """
    value = np.asarray(condition.value if isinstance(condition, DualReal) else condition, dtype=float)
    sample_id = ctx.sample_id if ctx is not None else None
    if not np.all(np.isfinite(value)):
        raise TraceError("Non-finite branch condition", sample_id=sample_id, site=site.name)

    taken = value < 0.0
    if ctx is not None and ctx.records(site):
        if isinstance(condition, DualReal):
            tangent = condition.tangent
        else:
            tangent = np.zeros(value.shape + (ctx.n,))
        flat_values = value.reshape(-1)
        flat_tangents = tangent.reshape(-1, tangent.shape[-1])
        for c, dc in zip(flat_values, flat_tangents):
            negative = bool(c < 0.0)
            ctx.registry.observe(
                ctx.path,
                site.name,
                BranchObservation(sample_id=ctx.sample_id, value=float(c), tangent=np.array(dc), taken=negative),
            )
            ctx.path = ctx.path.extend(site.name, negative)

    if taken.ndim == 0:
        return bool(taken)
    return taken
