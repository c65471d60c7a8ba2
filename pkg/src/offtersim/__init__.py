"""Headless off-road driving simulator with a safety-filtered control stack.

Seed-deterministic procedural terrain, a Pacejka bicycle vehicle model,
trail-relative state estimation, a control-barrier steering shield, and a
gym-style episode loop, exposed over a TCP line protocol and an HTTP
service.
"""

from .client import RemoteEnv, RemoteStep
from .config import (
    CONFIG_ENV_VAR,
    apply_overrides,
    config_from_environment,
    load_config_file,
    make_config,
)
from .dynamics import Action, VehicleParams, VehicleState, discrete_steer
from .environment import (
    EpisodeConfig,
    MetricsAccumulator,
    MetricsReport,
    OffTerSimEnv,
    RewardWeights,
    StepResult,
    aggregate,
    table_header,
    table_row,
)
from .errors import (
    ConfigError,
    DomainError,
    IOFailure,
    OffTerSimError,
    ProtocolError,
    SimulationFault,
)
from .expert import ExpertConfig, expert_action
from .frenet import Centerline, FrenetState, project, wrap_angle
from .protocol import PROTOCOL_VERSION, EnvRegistry, ProtocolServer, serve
from .rollout import RandomPolicy, run_episode, run_episodes, summarize
from .sensors import CameraSpec, Observation, ScanGridSpec, render_depth, scandots
from .shield import ShieldConfig, ShieldResult, filter_action, violation_flag
from .terrain import (
    RandomizationRanges,
    TerrainModel,
    TerrainParams,
    export_pgm16,
    height_at,
    read_pgm16,
    sample_terrain,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "CONFIG_ENV_VAR",
    "CameraSpec",
    "Centerline",
    "ConfigError",
    "DomainError",
    "EnvRegistry",
    "EpisodeConfig",
    "ExpertConfig",
    "FrenetState",
    "IOFailure",
    "MetricsAccumulator",
    "MetricsReport",
    "Observation",
    "OffTerSimEnv",
    "OffTerSimError",
    "PROTOCOL_VERSION",
    "ProtocolError",
    "ProtocolServer",
    "RandomPolicy",
    "RandomizationRanges",
    "RemoteEnv",
    "RemoteStep",
    "RewardWeights",
    "ScanGridSpec",
    "ShieldConfig",
    "ShieldResult",
    "SimulationFault",
    "StepResult",
    "TerrainModel",
    "TerrainParams",
    "VehicleParams",
    "VehicleState",
    "aggregate",
    "apply_overrides",
    "config_from_environment",
    "discrete_steer",
    "expert_action",
    "export_pgm16",
    "filter_action",
    "height_at",
    "load_config_file",
    "make_config",
    "project",
    "read_pgm16",
    "render_depth",
    "run_episode",
    "run_episodes",
    "sample_terrain",
    "scandots",
    "serve",
    "summarize",
    "table_header",
    "table_row",
    "violation_flag",
    "wrap_angle",
    "__version__",
]
