"""Hierarchical-codebook beam tracking for indoor THz links, as a Monte Carlo simulator."""

from .channel import NoiseModel, best_codeword, los_channel, measure_pilot
from .codebook import ArrayConfig, Codebook, build_codebook, codewords_near, half_power_beamwidth
from .errors import CodebookIndexError, ConfigurationError, GeometryError, ParameterError
from .geometry import MotionPath, Point2D, RoomConfig, WalkParams, generate_motion
from .sim import RunMetrics, ScenarioConfig, evaluate, run_episode, run_episodes, sweep
from .trackers import TRACKERS, TrackerConfig, TrackerState

__version__ = "0.1.0"

__all__ = [
    "ArrayConfig", "Codebook", "CodebookIndexError", "ConfigurationError", "GeometryError",
    "MotionPath", "NoiseModel", "ParameterError", "Point2D", "RoomConfig", "RunMetrics",
    "ScenarioConfig", "TRACKERS", "TrackerConfig", "TrackerState", "WalkParams",
    "best_codeword", "build_codebook", "codewords_near", "evaluate", "generate_motion",
    "half_power_beamwidth", "los_channel", "measure_pilot", "run_episode", "run_episodes", "sweep",
]
