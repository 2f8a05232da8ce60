"""Configuration for the crowd calibration toolkit."""
from crowdcal.config.config import (
    ForceConstants,
    BottleneckConfig,
    ExitSelectionConfig,
    HarnessConfig,
    LoggingConfig,
    Settings,
    load_config,
    configure_logging,
)
