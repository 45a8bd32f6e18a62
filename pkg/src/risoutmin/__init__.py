"""Outage-minimizing beamforming for RIS-aided mmWave downlinks."""

from .baselines import SchemeId, run_saa
from .channel import realize_scenario, sample_channel
from .config import ConfigError, RunConfig, ScenarioConfig, parse_config, render_config
from .estimators import SAABeamformer, SMMBeamformer, SSCABeamformer
from .evaluation import EvalReport, monte_carlo_eval, run_once, sweep
from .objective import BeamformingState, SmoothingParams
from .smm import run_smm_outmin
from .ssca import StepSizeRule, initialize, run_ssca_outmin
from .trace import RunTrace, StoppingRule

__version__ = "0.1.0"

__all__ = [
    "BeamformingState",
    "ConfigError",
    "EvalReport",
    "RunConfig",
    "RunTrace",
    "SAABeamformer",
    "SMMBeamformer",
    "SSCABeamformer",
    "ScenarioConfig",
    "SchemeId",
    "SmoothingParams",
    "StepSizeRule",
    "StoppingRule",
    "initialize",
    "monte_carlo_eval",
    "parse_config",
    "realize_scenario",
    "render_config",
    "run_once",
    "run_saa",
    "run_smm_outmin",
    "run_ssca_outmin",
    "sample_channel",
    "sweep",
]
