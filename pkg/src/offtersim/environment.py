"""Episode orchestration: randomization, stepping, reward, metrics.

An environment owns one episode at a time. reset(seed) draws terrain and
vehicle parameters from the configured ranges, spawns the vehicle at the
trail start, and returns the first observation. step() decodes the
action, routes steering through the safety filter, integrates the
dynamics, renders sensors and accumulates the reward terms and metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    Action,
    VehicleParams,
    VehicleState,
    conform_to_terrain,
    discrete_steer,
    longitudinal_accel,
    randomize_params,
    step as dynamics_step,
)
from .errors import ConfigError, ProtocolError, SimulationFault
from .expert import ExpertConfig, TrailObstacle, expert_action, speed_command
from .frenet import FrenetState, project
from .sensors import CameraSpec, Observation, ScanGridSpec, imu, render_depth, scandots
from .shield import ShieldConfig, ShieldResult, filter_action, violation_flag
from .terrain import RandomizationRanges, sample_terrain

ACTION_MODES = ("continuous", "discrete")
OBSERVATION_MODES = ("privileged", "depth", "both")


@dataclass(frozen=True)
class RewardWeights:
    progress: float = 1.0
    smooth: float = 0.5
    boundary: float = 2.0
    collision: float = 10.0
    k_constraint: float = 1.0


@dataclass(frozen=True)
class EpisodeConfig:
    ranges: RandomizationRanges = field(default_factory=RandomizationRanges)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    vehicle_spread: float = 0.1
    dt: float = 0.02
    max_steps: int = 3000
    action_mode: str = "continuous"
    n_actions: int = 7
    observation_mode: str = "privileged"
    shield: ShieldConfig = field(default_factory=ShieldConfig)
    rewards: RewardWeights = field(default_factory=RewardWeights)
    expert: ExpertConfig = field(default_factory=ExpertConfig)
    scan: ScanGridSpec = field(default_factory=ScanGridSpec)
    camera: CameraSpec = field(default_factory=CameraSpec)
    imu_sigma: float = 0.0
    # None: leaving the trail is only penalized; a number terminates the
    # episode once |x_lat| exceeds w/2 + margin
    offtrail_margin: float | None = None

    def validate(self) -> None:
        if not 0.0 < self.dt <= 0.1:
            raise ConfigError("dt must be in (0, 0.1]")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")
        if self.action_mode not in ACTION_MODES:
            raise ConfigError(f"unknown action_mode {self.action_mode!r}")
        if self.action_mode == "discrete" and self.n_actions < 2:
            raise ConfigError("discrete mode needs n_actions >= 2")
        if self.observation_mode not in OBSERVATION_MODES:
            raise ConfigError(f"unknown observation_mode {self.observation_mode!r}")
        if self.vehicle_spread < 0.0 or self.vehicle_spread >= 1.0:
            raise ConfigError("vehicle_spread must be in [0, 1)")
        if self.imu_sigma < 0.0:
            raise ConfigError("imu_sigma must be nonnegative")
        self.ranges.validate()
        self.expert.validate()


@dataclass
class StepResult:
    observation: Observation
    reward: float
    reward_terms: dict
    done: bool
    done_reason: str | None
    info: dict


@dataclass(frozen=True)
class MetricsReport:
    n_collisions: float
    collision_time: float
    progress: float
    cumulative_unevenness: float
    n_cbf_violations: float

    def to_dict(self) -> dict:
        return {
            "n_collisions": self.n_collisions,
            "collision_time": self.collision_time,
            "progress": self.progress,
            "cumulative_unevenness": self.cumulative_unevenness,
            "n_cbf_violations": self.n_cbf_violations,
        }


TABLE_COLUMNS = (
    "# collisions",
    "Collision time (s)",
    "Progress",
    "Cumulative unevenness",
    "# CBF Violations",
)


def table_header(label: str = "Index") -> str:
    return " & ".join((label,) + TABLE_COLUMNS)


def table_row(label: str, report: MetricsReport) -> str:
    vals = (
        report.n_collisions,
        report.collision_time,
        report.progress,
        report.cumulative_unevenness,
        report.n_cbf_violations,
    )
    return " & ".join([label] + [f"{v:.1f}" for v in vals])


def aggregate(reports) -> MetricsReport:
    """Arithmetic mean of each metric over runs."""
    reports = list(reports)
    if not reports:
        raise ValueError("aggregate needs at least one report")
    n = float(len(reports))
    return MetricsReport(
        n_collisions=sum(r.n_collisions for r in reports) / n,
        collision_time=sum(r.collision_time for r in reports) / n,
        progress=sum(r.progress for r in reports) / n,
        cumulative_unevenness=sum(r.cumulative_unevenness for r in reports) / n,
        n_cbf_violations=sum(r.n_cbf_violations for r in reports) / n,
    )


class MetricsAccumulator:
    """Per-step metric sums; mergeable so half-episodes concatenate cleanly."""

    def __init__(self, dt: float):
        self.dt = dt
        self.steps = 0
        self.n_onsets = 0
        self.collision_steps = 0
        self.progress = 0.0
        self.unevenness = 0.0
        self.violations = 0
        self._prev_collided = False
        self._first_step_collided: bool | None = None

    def update(self, collided: bool, ds: float, roll: float, pitch: float,
               violated: bool) -> None:
        if self._first_step_collided is None:
            self._first_step_collided = collided
        if collided and not self._prev_collided:
            self.n_onsets += 1
        if collided:
            self.collision_steps += 1
        self._prev_collided = collided
        self.progress += ds
        self.unevenness += roll * roll + pitch * pitch
        if violated:
            self.violations += 1
        self.steps += 1

    def merge(self, other: "MetricsAccumulator") -> "MetricsAccumulator":
        """Accumulator equivalent to running self's steps then other's."""
        if self.dt != other.dt:
            raise ValueError("cannot merge accumulators with different dt")
        out = MetricsAccumulator(self.dt)
        out.steps = self.steps + other.steps
        out.n_onsets = self.n_onsets + other.n_onsets
        # a collided state carried across the boundary is not a new onset
        if (self.steps and other.steps and self._prev_collided
                and other._first_step_collided):
            out.n_onsets -= 1
        out.collision_steps = self.collision_steps + other.collision_steps
        out.progress = self.progress + other.progress
        out.unevenness = self.unevenness + other.unevenness
        out.violations = self.violations + other.violations
        out._prev_collided = other._prev_collided if other.steps else self._prev_collided
        out._first_step_collided = (self._first_step_collided
                                    if self.steps else other._first_step_collided)
        return out

    def report(self) -> MetricsReport:
        return MetricsReport(
            n_collisions=float(self.n_onsets),
            collision_time=self.collision_steps * self.dt,
            progress=self.progress,
            cumulative_unevenness=self.unevenness,
            n_cbf_violations=float(self.violations),
        )


class OffTerSimEnv:
    """One episode at a time; strictly single-threaded."""

    def __init__(self, config: EpisodeConfig | None = None):
        self.config = config if config is not None else EpisodeConfig()
        self.config.validate()
        self.terrain = None
        self.params: VehicleParams | None = None
        self.state: VehicleState | None = None
        self.frenet: FrenetState | None = None
        self.terrain_seed: int | None = None
        self._prev_state: VehicleState | None = None
        self._noise_rng = None
        self._shield_cfg: ShieldConfig | None = None
        self._trail_obstacles: list[TrailObstacle] = []
        self._trail_length = 0.0
        self._metrics: MetricsAccumulator | None = None
        self._steps = 0
        self._done = True
        self._done_reason: str | None = None
        self._last_scan = None

    # -- episode lifecycle -------------------------------------------------

    def reset(self, seed: int) -> Observation:
        cfg = self.config
        ss = np.random.SeedSequence(seed)
        c_terrain, c_vehicle, c_noise = ss.spawn(3)
        self.terrain_seed = int(c_terrain.generate_state(1, dtype=np.uint64)[0])
        self.terrain = sample_terrain(self.terrain_seed, cfg.ranges)
        self.params = randomize_params(np.random.default_rng(c_vehicle),
                                       cfg.vehicle, cfg.vehicle_spread)
        self._noise_rng = np.random.default_rng(c_noise)

        cl = self.terrain.centerline
        self._trail_length = cl.arc_length(self.terrain.extent)
        yaw0 = float(np.arctan(cl.slope(0.0)))
        spawn = VehicleState(X=0.0, Y=float(cl.y(0.0)), z=0.0, yaw=yaw0,
                             roll=0.0, pitch=0.0, v_x=1.0, v_y=0.0,
                             omega=0.0, a_x=0.0, a_y=0.0,
                             collided=False, flipped=False)
        self.state = conform_to_terrain(spawn, self.terrain, self.params)
        self._prev_state = self.state
        self.frenet = self._project(self.state)

        self._shield_cfg = replace(cfg.shield, L=self.terrain.params.w,
                                   k_constraint=cfg.rewards.k_constraint)
        self._trail_obstacles = []
        for o in self.terrain.obstacles:
            x_near = cl.nearest_x(o.x, o.y)
            self._trail_obstacles.append(TrailObstacle(
                s=float(cl.arc_length(x_near)),
                offset=float(cl.signed_offset(o.x, o.y, x_near=x_near)),
                radius=o.radius,
            ))

        self._metrics = MetricsAccumulator(cfg.dt)
        self._steps = 0
        self._done = False
        self._done_reason = None
        return self._observe()

    def step(self, action=None) -> StepResult:
        if self._done:
            raise ProtocolError("episode is over; call reset() first")
        cfg = self.config

        act = self._decode_action(action)
        try:
            a_ref = longitudinal_accel(self.state, act, self.params)
            shield_res = filter_action(act.steer, self.frenet, a_ref,
                                       self.params, self._shield_cfg)
            executed = replace(act, steer=shield_res.u_safe)
            new_state = dynamics_step(self.state, executed, self.terrain,
                                      self.params, cfg.dt)
        except SimulationFault:
            self._done = True
            self._done_reason = "fault"
            terms = {"progress": 0.0, "smoothness": 0.0, "boundary": 0.0,
                     "collision": 0.0, "cbf": 0.0}
            neutral = ShieldResult(u_safe=act.steer, c_left=0.0, c_right=0.0,
                                   modified=False, r_constraint=0.0,
                                   violation=False)
            return StepResult(self._observe(), 0.0, terms, True, "fault",
                              {"shield": neutral, "frenet": self.frenet,
                               "action": act, "u_ref": act.steer})

        new_frenet = self._project(new_state)
        ds = new_frenet.s - self.frenet.s
        w = cfg.rewards
        half_w = self.terrain.params.w / 2.0
        terms = {
            "progress": w.progress * ds,
            "smoothness": -w.smooth * (new_state.roll ** 2 + new_state.pitch ** 2),
            "boundary": -w.boundary * max(0.0, abs(new_frenet.x_lat) - half_w),
            "collision": -w.collision * (1.0 if new_state.collided else 0.0),
            "cbf": -shield_res.r_constraint,
        }
        reward = sum(terms.values())

        violated = violation_flag(shield_res, self._shield_cfg.viol_tol)
        self._metrics.update(new_state.collided, ds, new_state.roll,
                             new_state.pitch, violated)

        self._steps += 1
        self._prev_state = self.state
        self.state = new_state
        self.frenet = new_frenet

        if new_state.flipped:
            self._done, self._done_reason = True, "flipped"
        elif new_frenet.s >= self._trail_length:
            self._done, self._done_reason = True, "reached_end"
        elif (cfg.offtrail_margin is not None
              and abs(new_frenet.x_lat) > half_w + cfg.offtrail_margin):
            self._done, self._done_reason = True, "offtrail"
        elif self._steps >= cfg.max_steps:
            self._done, self._done_reason = True, "horizon"

        return StepResult(
            observation=self._observe(),
            reward=reward,
            reward_terms=terms,
            done=self._done,
            done_reason=self._done_reason,
            info={"shield": shield_res, "frenet": new_frenet,
                  "action": act, "u_ref": act.steer},
        )

    @property
    def done(self) -> bool:
        return self._done

    @property
    def done_reason(self) -> str | None:
        return self._done_reason

    @property
    def trail_length(self) -> float:
        return self._trail_length

    @property
    def shield_config(self) -> ShieldConfig | None:
        """Per-episode shield settings (trail width baked in)."""
        return self._shield_cfg

    def metrics(self) -> MetricsReport:
        if self._metrics is None or not self._done:
            raise ProtocolError("metrics are only final once the episode is done")
        return self._metrics.report()

    def expert_action(self) -> Action:
        if self.frenet is None:
            raise ProtocolError("reset() before querying the expert")
        return expert_action(self.frenet, self._last_scan,
                             self._trail_obstacles, self.terrain.params.w,
                             self.config.expert, self.params, self.config.scan)

    # -- internals ---------------------------------------------------------

    def _decode_action(self, action) -> Action:
        cfg = self.config
        if action is None:
            return self.expert_action()
        if isinstance(action, (int, np.integer)):
            if cfg.action_mode != "discrete":
                raise ProtocolError("integer actions need discrete action_mode")
            if not 0 <= int(action) < cfg.n_actions:
                raise ProtocolError(
                    f"action index {int(action)} out of range [0, {cfg.n_actions})")
            steer = discrete_steer(int(action), cfg.n_actions)
            # discrete policies command heading only; speed tracking stays
            # with the built-in proportional law
            throttle, brake = speed_command(self.frenet, cfg.expert)
            return Action(steer=steer, throttle=throttle, brake=brake)
        if isinstance(action, Action):
            return action
        raise ProtocolError(f"cannot decode action of type {type(action).__name__}")

    def _project(self, state: VehicleState) -> FrenetState:
        return project(self.terrain.centerline, state.X, state.Y, state.yaw,
                       state.v_x, state.v_y, state.omega)

    def _observe(self) -> Observation:
        cfg = self.config
        accel, gyro, roll, pitch = imu(self.state, self._prev_state, cfg.dt,
                                       rng=self._noise_rng, sigma=cfg.imu_sigma)
        scan = None
        depth = None
        if cfg.observation_mode in ("privileged", "both"):
            scan = scandots(self.terrain, self.state, cfg.scan)
        if cfg.observation_mode in ("depth", "both"):
            depth = render_depth(self.terrain, self.state, cfg.camera)
        self._last_scan = scan
        return Observation(imu_accel=accel, imu_gyro=gyro, roll=roll,
                           pitch=pitch, frenet=self.frenet,
                           scandots=scan, depth=depth)
