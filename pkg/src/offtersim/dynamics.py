"""Dynamic bicycle model with Pacejka tires and terrain conformance.

The planar body-frame ODE integrates longitudinal/lateral velocity and yaw
rate under tire forces and gravity components; terrain contact is
kinematic: after each step the height, roll and pitch are slaved to the
ground under the wheels. Body axes: x forward, y left, z up; yaw
counter-clockwise; positive roll drops the right side, positive pitch
lifts the nose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace, asdict

import numpy as np

from .errors import SimulationFault
from .terrain import TerrainModel, height_at, height_at_many

# denominator clamp for the slip-angle arctans [m/s]
_EPS_V = 0.1


@dataclass(frozen=True)
class VehicleParams:
    """Mass, geometry, tire and actuator coefficients.

    C_f_lin / C_r_lin are the linear cornering stiffnesses used by the
    steering shield's internal model; they default to the small-angle
    slope of the Pacejka curve, B*C*D / 2 per axle side.
    """

    m: float = 300.0
    I_z: float = 150.0
    l_f: float = 0.8
    l_r: float = 0.9
    B_f: float = 8.0
    C_f_pac: float = 1.5
    D_f: float = 1500.0
    B_r: float = 8.0
    C_r_pac: float = 1.5
    D_r: float = 1400.0
    K_throttle: float = 1200.0
    K_brake: float = -2500.0
    C_f_lin: float = 9000.0
    C_r_lin: float = 8400.0
    delta_max: float = 0.5
    veh_radius: float = 1.0
    com_height: float = 0.5
    g: float = 9.81
    roll_limit: float = 0.6
    pitch_limit: float = 0.6
    track_ratio: float = 0.8   # track width as a fraction of wheelbase

    def __post_init__(self):
        for name in ("m", "I_z", "l_f", "l_r", "D_f", "D_r", "delta_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.K_brake > 0:
            raise ValueError("K_brake must be <= 0 (brake opposes motion)")

    @property
    def wheelbase(self) -> float:
        return self.l_f + self.l_r

    @property
    def track(self) -> float:
        return self.track_ratio * self.wheelbase

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class VehicleState:
    X: float = 0.0
    Y: float = 0.0
    z: float = 0.0
    yaw: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    v_x: float = 0.0
    v_y: float = 0.0
    omega: float = 0.0
    a_x: float = 0.0
    a_y: float = 0.0
    collided: bool = False
    flipped: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Action:
    """Clamped control command; steer maps to delta = steer * delta_max."""

    steer: float = 0.0
    throttle: float = 0.0
    brake: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "steer", min(max(float(self.steer), -1.0), 1.0))
        object.__setattr__(self, "throttle", min(max(float(self.throttle), 0.0), 1.0))
        object.__setattr__(self, "brake", min(max(float(self.brake), 0.0), 1.0))

    def to_dict(self) -> dict:
        return asdict(self)


def discrete_steer(k: int, n: int) -> float:
    """Steer command for index k of n evenly spaced values in [-1, 1]."""
    if n < 2:
        raise ValueError("need at least two discrete actions")
    if not 0 <= k < n:
        raise ValueError(f"action index {k} outside [0, {n})")
    return -1.0 + 2.0 * k / (n - 1)


def slip_angles(v_x: float, v_y: float, omega: float, delta: float,
                params: VehicleParams) -> tuple:
    """Front and rear tire slip angles with the low-speed clamp."""
    v = max(v_x, _EPS_V)
    alpha_f = delta - math.atan((v_y + omega * params.l_f) / v)
    alpha_r = math.atan((omega * params.l_r - v_y) / v)
    return alpha_f, alpha_r


def lateral_force(alpha: float, b: float, c: float, d: float) -> float:
    """Pacejka magic formula D*sin(C*arctan(B*alpha))."""
    return d * math.sin(c * math.atan(b * alpha))


def tire_forces(v_x: float, v_y: float, omega: float, action: Action,
                params: VehicleParams, brake_sign: float | None = None) -> tuple:
    """(F_rx, F_fy, F_ry) for the current state and command.

    The brake acts against the direction of motion; during integration
    the sign is frozen at the step start (``brake_sign``) so the RK4
    stages see a smooth force.
    """
    delta = action.steer * params.delta_max
    alpha_f, alpha_r = slip_angles(v_x, v_y, omega, delta, params)
    if brake_sign is None:
        brake_sign = float(v_x > 0.0) - float(v_x < 0.0)
    f_rx = (params.K_throttle * action.throttle
            + params.K_brake * action.brake * brake_sign)
    f_fy = lateral_force(alpha_f, params.B_f, params.C_f_pac, params.D_f)
    f_ry = lateral_force(alpha_r, params.B_r, params.C_r_pac, params.D_r)
    return f_rx, f_fy, f_ry


def _derivatives(y: np.ndarray, action: Action, roll: float, pitch: float,
                 params: VehicleParams, brake_sign: float) -> np.ndarray:
    """d/dt of [X, Y, yaw, v_x, v_y, omega] with attitude held fixed."""
    _, _, yaw, v_x, v_y, omega = y
    delta = action.steer * params.delta_max
    f_rx, f_fy, f_ry = tire_forces(v_x, v_y, omega, action, params,
                                   brake_sign=brake_sign)
    m, g = params.m, params.g
    dvx = (f_rx - f_fy * math.sin(delta)) / m + v_y * omega - g * math.sin(pitch)
    dvy = (f_ry + f_fy * math.cos(delta)) / m - v_x * omega - g * math.sin(roll)
    domega = (params.l_f * f_fy * math.cos(delta) - params.l_r * f_ry) / params.I_z
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([v_x * cy - v_y * sy,
                     v_x * sy + v_y * cy,
                     omega, dvx, dvy, domega])


def _wheel_attitude(terrain: TerrainModel, x: float, y: float, yaw: float,
                    params: VehicleParams) -> tuple:
    """(ground_z, roll, pitch) from a least-squares plane over the wheels.

    Wheel contact points sit at (+-l_f / -l_r, +-track/2) in the body
    frame; points falling off the grid edge are sampled at the clamped
    position so an episode can run out its termination check.
    """
    half_track = params.track / 2.0
    bx = np.array([params.l_f, params.l_f, -params.l_r, -params.l_r])
    by = np.array([half_track, -half_track, half_track, -half_track])
    cy, sy = math.cos(yaw), math.sin(yaw)
    wx = np.clip(x + bx * cy - by * sy, 0.0, terrain.extent)
    wy = np.clip(y + bx * sy + by * cy, 0.0, terrain.extent)
    hz = height_at_many(terrain, wx, wy)
    a = np.column_stack([np.ones(4), bx, by])
    coef, *_ = np.linalg.lstsq(a, hz, rcond=None)
    _, gx, gy = coef
    cx = float(np.clip(x, 0.0, terrain.extent))
    cy2 = float(np.clip(y, 0.0, terrain.extent))
    # ground rising ahead lifts the nose; rising to the left drops the right
    return height_at(terrain, cx, cy2), math.atan(gy), math.atan(gx)


def collision_check(x: float, y: float, obstacles, veh_radius: float) -> bool:
    """True iff any obstacle circle strictly overlaps the vehicle circle."""
    for o in obstacles:
        if math.hypot(x - o.x, y - o.y) < veh_radius + o.radius:
            return True
    return False


def step(state: VehicleState, action: Action, terrain: TerrainModel,
         params: VehicleParams, dt: float = 0.02) -> VehicleState:
    """One RK4 step of the planar ODE followed by terrain conformance."""
    if not 0.0 < dt <= 0.1:
        raise ValueError("dt must be in (0, 0.1]")

    y0 = np.array([state.X, state.Y, state.yaw,
                   state.v_x, state.v_y, state.omega])
    roll, pitch = state.roll, state.pitch
    bsign = float(state.v_x > 0.0) - float(state.v_x < 0.0)

    k1 = _derivatives(y0, action, roll, pitch, params, bsign)
    k2 = _derivatives(y0 + 0.5 * dt * k1, action, roll, pitch, params, bsign)
    k3 = _derivatives(y0 + 0.5 * dt * k2, action, roll, pitch, params, bsign)
    k4 = _derivatives(y0 + dt * k3, action, roll, pitch, params, bsign)
    y1 = y0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    # braking may not push the vehicle through zero within one step
    if action.brake > 0.0 and state.v_x * y1[3] < 0.0:
        y1[3] = 0.0

    if not np.all(np.isfinite(y1)):
        raise SimulationFault("non-finite vehicle state after integration")

    x_new, y_new, yaw_new, v_x_new, v_y_new, omega_new = y1
    ground, roll_new, pitch_new = _wheel_attitude(
        terrain, float(x_new), float(y_new), float(yaw_new), params)

    return VehicleState(
        X=float(x_new),
        Y=float(y_new),
        z=ground + params.com_height,
        yaw=float(yaw_new),
        roll=roll_new,
        pitch=pitch_new,
        v_x=float(v_x_new),
        v_y=float(v_y_new),
        omega=float(omega_new),
        a_x=float((v_x_new - state.v_x) / dt),
        a_y=float((v_y_new - state.v_y) / dt),
        collided=collision_check(float(x_new), float(y_new),
                                 terrain.obstacles, params.veh_radius),
        flipped=(abs(roll_new) > params.roll_limit
                 or abs(pitch_new) > params.pitch_limit),
    )


def longitudinal_accel(state: VehicleState, action: Action,
                       params: VehicleParams) -> float:
    """v_x rate at the current state under the given (pre-filter) action."""
    y = np.array([state.X, state.Y, state.yaw,
                  state.v_x, state.v_y, state.omega])
    bsign = float(state.v_x > 0.0) - float(state.v_x < 0.0)
    return float(_derivatives(y, action, state.roll, state.pitch,
                              params, bsign)[3])


def conform_to_terrain(state: VehicleState, terrain: TerrainModel,
                       params: VehicleParams) -> VehicleState:
    """Settle a freshly spawned pose onto the ground without moving it."""
    ground, roll, pitch = _wheel_attitude(
        terrain, state.X, state.Y, state.yaw, params)
    return replace(state, z=ground + params.com_height, roll=roll, pitch=pitch,
                   collided=collision_check(state.X, state.Y,
                                            terrain.obstacles,
                                            params.veh_radius),
                   flipped=(abs(roll) > params.roll_limit
                            or abs(pitch) > params.pitch_limit))


def randomize_params(rng: np.random.Generator, base: VehicleParams,
                     spread: float = 0.1) -> VehicleParams:
    """Scale inertial and tire parameters by U(1-spread, 1+spread).

    The linear stiffnesses track the Pacejka peak scaling so the
    shield's internal model stays consistent with the plant.
    """
    if spread < 0:
        raise ValueError("spread must be >= 0")
    f = lambda: float(rng.uniform(1.0 - spread, 1.0 + spread))
    d_f_scale = f()
    d_r_scale = f()
    return replace(
        base,
        m=base.m * f(),
        I_z=base.I_z * f(),
        D_f=base.D_f * d_f_scale,
        D_r=base.D_r * d_r_scale,
        C_f_lin=base.C_f_lin * d_f_scale,
        C_r_lin=base.C_r_lin * d_r_scale,
        K_throttle=base.K_throttle * f(),
        K_brake=base.K_brake * f(),
    )
