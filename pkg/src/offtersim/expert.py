"""Rule-based driving controller with privileged access to trail state.

Picks a lateral offset along the trail by scoring a small set of candidate
lines (obstacle clearance, centering, terrain roughness under the scan
grid), then tracks the chosen line with pure pursuit and a proportional
speed law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Action, VehicleParams
from .errors import ConfigError
from .frenet import FrenetState
from .sensors import ScanGridSpec


@dataclass(frozen=True)
class ExpertConfig:
    lookahead: float = 6.0
    target_speed: float = 6.0
    curvature_slowdown: float = 8.0
    n_offsets: int = 9
    offset_margin: float = 1.0
    obstacle_clearance: float = 1.5
    kp_speed: float = 0.5
    # hazards are scored further out than the steering target so that an
    # obstacle just past the pursuit point still shapes the line choice
    hazard_horizon: float = 12.0
    arc_spacing: float = 1.0
    w_obs: float = 10.0
    w_center: float = 0.2
    w_rough: float = 1.0
    brake_deadband: float = 1.0

    def validate(self) -> None:
        if self.lookahead <= 0.0:
            raise ConfigError("lookahead must be positive")
        if self.n_offsets < 3 or self.n_offsets % 2 == 0:
            raise ConfigError("n_offsets must be odd and >= 3")
        if self.target_speed <= 0.0:
            raise ConfigError("target_speed must be positive")
        if self.kp_speed <= 0.0:
            raise ConfigError("kp_speed must be positive")
        if self.hazard_horizon < self.lookahead:
            raise ConfigError("hazard_horizon must cover the lookahead")
        if self.arc_spacing <= 0.0:
            raise ConfigError("arc_spacing must be positive")


@dataclass(frozen=True)
class TrailObstacle:
    """Obstacle projected into trail coordinates.

    ``s`` is arc length of the nearest centerline point, ``offset`` the
    signed lateral offset (positive right of trail), ``radius`` the
    horizontal footprint.
    """

    s: float
    offset: float
    radius: float


def candidate_offsets(trail_width: float, config: ExpertConfig) -> np.ndarray:
    """Lateral offset candidates, ordered for tie-breaking.

    Evenly spaced over [-w/2 + margin, w/2 - margin], sorted by |offset|
    with the negative member of each pair first, so a plain strict argmin
    realizes the documented tie-break.
    """
    half = trail_width / 2.0 - config.offset_margin
    if half <= 0.0:
        return np.zeros(1)
    grid = np.linspace(-half, half, config.n_offsets)
    order = sorted(range(len(grid)), key=lambda i: (abs(grid[i]), grid[i]))
    return grid[order]


def offset_grid_spacing(trail_width: float, config: ExpertConfig) -> float:
    half = trail_width / 2.0 - config.offset_margin
    if half <= 0.0:
        return 0.0
    return 2.0 * half / (config.n_offsets - 1)


def _arc_body_points(
    frenet: FrenetState, offset: float, u: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Body-frame coordinates of the offset line sampled at arc distances u.

    Uses the local tangent frame: the centerline bends by ~c*u^2/2 (to the
    left for positive curvature), the lateral shift from vehicle to line is
    offset - x_lat measured right-positive, and the heading error rotates
    the whole picture into the body frame.
    """
    dx_t = u
    dy_t = frenet.c * u * u / 2.0 - (offset - frenet.x_lat)
    ct, st = math.cos(frenet.theta), math.sin(frenet.theta)
    bx = ct * dx_t + st * dy_t
    by = -st * dx_t + ct * dy_t
    return bx, by


def _scan_heights_along(
    scandots: np.ndarray, spec: ScanGridSpec, bx: np.ndarray, by: np.ndarray
) -> np.ndarray:
    lon_step = (spec.lon_max - spec.lon_min) / (spec.n_lon - 1)
    lat_step = (spec.lat_max - spec.lat_min) / (spec.n_lat - 1)
    rows = np.clip(np.rint((bx - spec.lon_min) / lon_step).astype(int), 0, spec.n_lon - 1)
    cols = np.clip(np.rint((spec.lat_max - by) / lat_step).astype(int), 0, spec.n_lat - 1)
    return scandots[rows, cols]


def offset_cost(
    frenet: FrenetState,
    offset: float,
    scandots: np.ndarray | None,
    obstacles: list[TrailObstacle],
    config: ExpertConfig,
    scan_spec: ScanGridSpec | None = None,
) -> float:
    """Score one candidate line; lower is better."""
    n = int(round(config.hazard_horizon / config.arc_spacing)) + 1
    u = np.linspace(0.0, config.hazard_horizon, n)

    cost = config.w_center * offset * offset

    for obs in obstacles:
        ds = frenet.s + u - obs.s
        d = np.hypot(ds, offset - obs.offset)
        pen = np.maximum(0.0, obs.radius + config.obstacle_clearance - d)
        cost += config.w_obs * float(np.sum(pen * pen))

    if scandots is not None:
        spec = scan_spec if scan_spec is not None else ScanGridSpec()
        bx, by = _arc_body_points(frenet, offset, u)
        heights = _scan_heights_along(scandots, spec, bx, by)
        cost += config.w_rough * float(np.var(heights))

    return cost


def choose_offset(
    frenet: FrenetState,
    scandots: np.ndarray | None,
    obstacles: list[TrailObstacle],
    trail_width: float,
    config: ExpertConfig,
    scan_spec: ScanGridSpec | None = None,
) -> float:
    best_off = 0.0
    best_cost = math.inf
    for off in candidate_offsets(trail_width, config):
        c = offset_cost(frenet, off, scandots, obstacles, config, scan_spec)
        if c < best_cost:
            best_cost = c
            best_off = float(off)
    return best_off


def pure_pursuit_steer(
    frenet: FrenetState, offset: float, config: ExpertConfig, params: VehicleParams
) -> float:
    """Steer command in [-1, 1] tracking the line at the lookahead point."""
    u = np.asarray([config.lookahead])
    bx, by = _arc_body_points(frenet, offset, u)
    tx, ty = float(bx[0]), float(by[0])
    alpha = math.atan2(ty, tx)
    ld = math.hypot(tx, ty)
    delta = math.atan2(2.0 * params.wheelbase * math.sin(alpha), ld)
    return float(np.clip(delta / params.delta_max, -1.0, 1.0))


def speed_command(frenet: FrenetState, config: ExpertConfig) -> tuple[float, float]:
    """(throttle, brake) from the proportional speed law."""
    v_target = config.target_speed / (1.0 + config.curvature_slowdown * abs(frenet.c))
    err = v_target - frenet.v
    throttle = float(np.clip(config.kp_speed * err, 0.0, 1.0))
    brake = 0.0
    if -err > config.brake_deadband:
        brake = float(np.clip(config.kp_speed * -err, 0.0, 1.0))
    return throttle, brake


def expert_action(
    frenet: FrenetState,
    scandots: np.ndarray | None,
    obstacles: list[TrailObstacle],
    trail_width: float,
    config: ExpertConfig | None = None,
    params: VehicleParams | None = None,
    scan_spec: ScanGridSpec | None = None,
) -> Action:
    cfg = config if config is not None else ExpertConfig()
    par = params if params is not None else VehicleParams()
    target = choose_offset(frenet, scandots, obstacles, trail_width, cfg, scan_spec)
    steer = pure_pursuit_steer(frenet, target, cfg, par)
    throttle, brake = speed_command(frenet, cfg)
    return Action(steer=steer, throttle=throttle, brake=brake)
