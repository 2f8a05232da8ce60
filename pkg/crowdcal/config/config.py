"""Configuration module for the crowd calibration toolkit.

Every default lives on the dataclasses below; they are the schema of the
sectioned key-value config file (see ``crowdcal.ini.example``).
"""
import os
import logging
import configparser
from dataclasses import dataclass, field, fields, asdict, replace
from typing import Dict, Any, Optional, Mapping, Type, TypeVar
import dotenv

from crowdcal.exceptions import ConfigError

# Load environment variables from .env file if present
dotenv.load_dotenv()

ENV_PREFIX = "CROWDCAL"

T = TypeVar("T")


def _coerce(raw: str, current: Any, key: str) -> Any:
    """Convert a config string to the type of the field's default."""
    try:
        if isinstance(current, bool):
            return raw.strip().lower() in ("true", "yes", "1", "y", "on")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if current is None:
            return raw or None
        return raw
    except ValueError as e:
        raise ConfigError(f"Invalid value for {key}: {raw!r} ({e})")


class _Section:
    """Mixin giving a config dataclass file/env loading and dict export."""

    section: str = ""

    @classmethod
    def from_mapping(cls: Type[T], values: Mapping[str, str], base: Optional[T] = None) -> T:
        """Build a config from string values keyed by field name."""
        obj = base if base is not None else cls()
        known = {f.name for f in fields(obj)}
        updates = {}
        for key, raw in values.items():
            name = key.strip().lower()
            if name not in known:
                raise ConfigError(f"Unknown setting [{cls.section}] {key}")
            updates[name] = _coerce(raw, getattr(obj, name), f"{cls.section}.{name}")
        return replace(obj, **updates)

    @classmethod
    def from_env(cls: Type[T], base: Optional[T] = None) -> T:
        """Create a configuration from ``CROWDCAL_<SECTION>_<FIELD>`` variables."""
        obj = base if base is not None else cls()
        prefix = f"{ENV_PREFIX}_{cls.section.upper()}_"
        values = {
            key[len(prefix):]: value
            for key, value in os.environ.items()
            if key.startswith(prefix)
        }
        return cls.from_mapping(values, obj) if values else obj

    def to_dict(self) -> Dict[str, Any]:
        """Convert the configuration to a dictionary."""
        return asdict(self)


@dataclass(frozen=True)
class ForceConstants(_Section):
    """Social Force constants (PEDSIM-family magnitudes) and integration settings."""
    section = "force"

    a_agent: float = 3.0
    b_agent: float = 0.2          # m
    a_wall: float = 10.0
    b_wall: float = 0.2           # m
    lambda_fov: float = 0.35
    radius: float = 0.2           # m
    desired_speed: float = 1.34   # m/s
    tau: float = 0.5              # s
    mass: float = 80.0            # kg
    max_force: float = 500.0      # N, per pairwise term
    speed_factor: float = 1.3     # speed clamp as a multiple of v0
    dt: float = 0.1               # s
    neighbor_cutoff: float = 10.0  # m, used by the grid search only
    grid_threshold: int = 100     # agents; above this the grid search is used
    waypoint_radius: float = 0.5  # m
    full_dgo: bool = False        # register force-code branch sites


@dataclass(frozen=True)
class BottleneckConfig(_Section):
    """Single-door bottleneck scenario."""
    section = "bottleneck"

    arena_size: float = 30.0      # m, square side
    door_width: float = 4.0       # m
    agents: int = 3
    duration: float = 20.0        # s
    objective: str = "position"   # position | evac
    reference: float = 0.0
    spawn_margin: float = 1.0     # m from walls
    target_x: float = 28.0        # m, waypoint behind the door


@dataclass(frozen=True)
class ExitSelectionConfig(_Section):
    """Four-exit selection scenario with histogram-valued parameters."""
    section = "exit_selection"

    agents: int = 50
    arena_width: float = 40.0     # m
    arena_height: float = 30.0    # m
    exit_width: float = 3.0       # m
    reconsider_period: float = 15.0  # s
    warm_up: float = 100.0        # s
    arrival_window: float = 200.0  # s, agents arrive evenly over this span
    count_warm_up: bool = False   # measure agents spawned before warm_up too
    coefficient_low: float = 0.1
    coefficient_high: float = 1.0
    output_low: float = 10.0      # s
    output_high: float = 75.0     # s
    bins: int = 20
    congestion_radius: float = 5.0  # m
    horizon_margin: float = 10.0  # s
    track_exit_choice: bool = False
    min_weight: float = 1e-6
    reference_path: Optional[str] = None


@dataclass(frozen=True)
class HarnessConfig(_Section):
    """Experiment harness settings."""
    section = "harness"

    output_dir: str = "results"
    master_seed: int = 20240101
    workers: int = 1
    macroreplications: int = 20
    microreplications: int = 10
    budget_seconds: float = 30.0
    max_evaluations: int = 5000
    post_seeds: int = 100
    crisp_seeds: int = 5
    reference_samples: int = 10000
    registry_cap: int = 10000
    show_progress: bool = True


@dataclass(frozen=True)
class LoggingConfig(_Section):
    """Logging settings."""
    section = "logging"

    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    log_file: Optional[str] = None


@dataclass(frozen=True)
class Settings:
    """All configuration sections bundled together."""
    force: ForceConstants = field(default_factory=ForceConstants)
    bottleneck: BottleneckConfig = field(default_factory=BottleneckConfig)
    exit_selection: ExitSelectionConfig = field(default_factory=ExitSelectionConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)

    def to_dict(self) -> Dict[str, Any]:
        """Flatten all sections into ``section.key`` entries."""
        flat = {}
        for f in fields(self):
            for key, value in getattr(self, f.name).to_dict().items():
                flat[f"{f.name}.{key}"] = value
        return flat

    @classmethod
    def from_dict(cls, flat: Mapping[str, Any]) -> "Settings":
        """Rebuild settings from ``section.key`` entries as written by ``to_dict``.

        Raises:
            ConfigError: On an unknown section or key
        """
        grouped: Dict[str, Dict[str, Any]] = {}
        for dotted, value in flat.items():
            section, _, key = dotted.partition(".")
            grouped.setdefault(section, {})[key] = value
        sections = {}
        for section, values in grouped.items():
            section_cls = SECTIONS.get(section)
            if section_cls is None:
                raise ConfigError(f"Unknown config section: [{section}]")
            known = {f.name for f in fields(section_cls)}
            unknown = set(values) - known
            if unknown:
                raise ConfigError(f"Unknown setting [{section}] {sorted(unknown)[0]}")
            sections[section] = section_cls(**values)
        return cls(**sections)


SECTIONS = {
    "force": ForceConstants,
    "bottleneck": BottleneckConfig,
    "exit_selection": ExitSelectionConfig,
    "harness": HarnessConfig,
    "logging": LoggingConfig,
}


def load_config(path: Optional[str] = None) -> Settings:
    """Load settings from defaults, an optional INI file and the environment.

    Args:
        path: Optional path to a sectioned key-value config file

    Returns:
        Settings with file values applied over defaults and environment over both

    Raises:
        ConfigError: If the file is missing or contains unknown sections or keys
    """
    sections = {name: cls() for name, cls in SECTIONS.items()}

    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"Config file not found: {path}")
        parser = configparser.ConfigParser()
        parser.read(path)
        for name in parser.sections():
            if name not in SECTIONS:
                raise ConfigError(f"Unknown config section: [{name}]")
            sections[name] = SECTIONS[name].from_mapping(dict(parser[name]), sections[name])

    for name, cls in SECTIONS.items():
        sections[name] = cls.from_env(sections[name])

    return Settings(**sections)


def configure_logging(config: LoggingConfig) -> None:
    """Configure logging based on the configuration."""
    handlers = []

    # Console handler
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(logging.Formatter(config.log_format))
    handlers.append(console_handler)

    # File handler if log file specified
    if config.log_file:
        file_handler = logging.FileHandler(config.log_file)
        file_handler.setFormatter(logging.Formatter(config.log_format))
        handlers.append(file_handler)

    level = config.log_level
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)

    # Configure root logger
    logging.basicConfig(
        level=level,
        handlers=handlers,
        format=config.log_format,
        force=True,
    )
