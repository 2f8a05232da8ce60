"""Experiment plans and the hyperparameter grid."""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from crowdcal.estimators import EstimatorConfig, EstimatorKind
from crowdcal.exceptions import InvalidConfigError
from crowdcal.optimizers import GAConfig, GDConfig, PSOConfig, lhs_coefficients

logger = logging.getLogger(__name__)

METHODS = ("gd-ipa", "gd-dgo", "gd-hybrid", "gd-pgo", "pso", "ga")
SCENARIOS = ("bottleneck-position", "bottleneck-evac", "exit-selection", "heaviside", "quadratic", "sphere")

# hyperparameter ranges of the full grid
FULL_GRID = {
    "learning_rate": (0.01, 0.1, 0.5, 1.0),
    "samples": (1, 10, 50),
    "sigma": (0.0, 0.01, 0.1, 0.5, 1.0),
    "particles": (10, 50),
    "neighbors": (3, 6, "all"),
    "lhs_points": 10,
    "population": (10, 50),
    "elitism": (True, False),
    "mutation": ("replace", "additive"),
}

DESK_GRID = {
    "learning_rate": (0.1, 0.5),
    "samples": (10,),
    "sigma": (0.0, 0.1),
    "particles": (10,),
    "neighbors": (3, "all"),
    "lhs_points": 2,
    "population": (10,),
    "elitism": (True,),
    "mutation": ("replace", "additive"),
}

GRIDS = {"full": FULL_GRID, "desk": DESK_GRID}


@dataclass(frozen=True)
class MethodConfig:
    """One grid point: a method and its hyperparameters."""
    config_id: str
    index: int
    method: str
    hyperparameters: Tuple[Tuple[str, Any], ...]

    @property
    def params(self) -> Dict[str, Any]:
        return dict(self.hyperparameters)

    def build(self, registry_cap: int = 10000) -> Union[GDConfig, PSOConfig, GAConfig]:
        """Instantiate the optimizer config of this grid point."""
        p = self.params
        if self.method.startswith("gd-"):
            kind = EstimatorKind(self.method.split("-", 1)[1])
            estimator = EstimatorConfig(
                samples=int(p["samples"]), sigma=float(p["sigma"]), mode=kind, registry_cap=registry_cap
            )
            return GDConfig(learning_rate=float(p["learning_rate"]), estimator=estimator)
        if self.method == "pso":
            neighbors = p["neighbors"] if p["neighbors"] == "all" else int(p["neighbors"])
            return PSOConfig(
                particles=int(p["particles"]),
                cognitive=float(p["cognitive"]),
                social=float(p["social"]),
                inertia=float(p["inertia"]),
                neighbors=neighbors,
            )
        if self.method == "ga":
            return GAConfig(population=int(p["population"]), elitism=bool(p["elitism"]), mutation=str(p["mutation"]))
        raise InvalidConfigError(f"Unknown method: {self.method}")


def _gd_points(method: str, grid: Dict[str, Any]) -> List[Dict[str, Any]]:
    points = []
    for lr, samples, sigma in itertools.product(grid["learning_rate"], grid["samples"], grid["sigma"]):
        if method == "gd-pgo" and sigma <= 0:
            continue
        points.append({"learning_rate": lr, "samples": samples, "sigma": sigma})
    return points


def build_grid(methods: Sequence[str], grid: str = "desk", seed: int = 0) -> List[MethodConfig]:
    """Enumerate the grid points of the requested methods.

    Args:
        methods: Method names from METHODS
        grid: "desk" (small subset) or "full"
        seed: Seed of the Latin hypercube over the PSO coefficients

    Raises:
        InvalidConfigError: For unknown methods or grids, or an empty grid
    """
    if grid not in GRIDS:
        raise InvalidConfigError(f"Unknown grid {grid!r}, expected one of {sorted(GRIDS)}")
    ranges = GRIDS[grid]
    configs: List[MethodConfig] = []

    for method in methods:
        if method not in METHODS:
            raise InvalidConfigError(f"Unknown method {method!r}, expected one of {METHODS}")
        if method.startswith("gd-"):
            points = _gd_points(method, ranges)
        elif method == "pso":
            coefficients = lhs_coefficients(ranges["lhs_points"], seed)
            points = [
                {"particles": p, "cognitive": c1, "social": c2, "inertia": w, "neighbors": k}
                for p, (c1, c2, w), k in itertools.product(ranges["particles"], coefficients, ranges["neighbors"])
            ]
        else:
            points = [
                {"population": p, "elitism": e, "mutation": m}
                for p, e, m in itertools.product(ranges["population"], ranges["elitism"], ranges["mutation"])
            ]
        for point in points:
            index = len(configs)
            configs.append(
                MethodConfig(f"{method}-{index:03d}", index, method, tuple(sorted(point.items())))
            )

    if not configs:
        raise InvalidConfigError("Hyperparameter grid is empty")
    logger.info(f"Built {grid} grid with {len(configs)} configurations over {len(methods)} methods")
    return configs


@dataclass
class SweepPlan:
    """A hyperparameter sweep with macro- and microreplications."""
    scenario: str
    configs: List[MethodConfig]
    macroreplications: int = 20
    microreplications: int = 10
    max_evaluations: int = 5000
    budget_seconds: Optional[float] = 30.0
    post_seeds: int = 100
    crisp_seeds: int = 5
    master_seed: int = 20240101
    output_dir: str = "results"
    reference_path: Optional[str] = None
    workers: int = 1
    show_progress: bool = True

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidConfigError(f"Unknown scenario {self.scenario!r}, expected one of {SCENARIOS}")
        if not self.configs:
            raise InvalidConfigError("Sweep grid is empty")
        if self.macroreplications < 1 or self.microreplications < 1:
            raise InvalidConfigError("Replication counts must be >= 1")
        if self.post_seeds < 1 or self.crisp_seeds < 1:
            raise InvalidConfigError("Post and crisp seed counts must be >= 1")


@dataclass
class FidelityPlan:
    """A one-coordinate sweep comparing gradient estimators against a reference."""
    scenario: str
    coordinate: int = 0
    lo: float = -2.0
    hi: float = 2.0
    points: int = 100
    fixed: Optional[List[float]] = None
    sigma: float = 0.0
    pgo_sigma: float = 0.01
    samples: List[int] = field(default_factory=lambda: [10, 100, 1000])
    estimators: List[str] = field(default_factory=lambda: ["ipa", "dgo", "hybrid", "pgo"])
    reference_samples: int = 10000
    reference_sigma: float = 0.01
    seed: int = 0
    output_dir: str = "results"
    show_progress: bool = True

    def __post_init__(self):
        if self.points < 2:
            raise InvalidConfigError(f"Fidelity sweeps need at least 2 points, got {self.points}")
        if not self.samples or min(self.samples) < 1:
            raise InvalidConfigError("Sample counts must be positive")
        for name in self.estimators:
            try:
                EstimatorKind(name)
            except ValueError:
                raise InvalidConfigError(f"Unknown estimator: {name}")
        if "pgo" in self.estimators and self.pgo_sigma <= 0:
            raise InvalidConfigError("PGO needs pgo_sigma > 0")
