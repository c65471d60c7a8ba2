"""Sensor models: scandot height grid, ray-cast depth camera, IMU.

The depth camera uses an even-angle pixel grid: pixel centers sit at
((k + 0.5) - N/2) / N of the field of view, so mirrored pixel pairs map
to exactly negated azimuths and a laterally mirrored scene renders as the
exact horizontal flip. Terrain hits are found by fixed-step ray marching
with bisection refinement; obstacles are capped vertical cylinders with
analytic intersections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import VehicleState
from .frenet import FrenetState
from .terrain import TerrainModel, height_at, height_at_many


@dataclass(frozen=True)
class ScanGridSpec:
    """Body-frame sample grid: n_lon rows ahead by n_lat columns across."""

    n_lat: int = 11
    n_lon: int = 15
    lat_min: float = -5.0
    lat_max: float = 5.0
    lon_min: float = 0.0
    lon_max: float = 14.0
    max_range: float = 30.0


@dataclass(frozen=True)
class CameraSpec:
    width: int = 64
    height: int = 64
    fov_h: float = math.radians(90.0)
    fov_v: float = math.radians(90.0)
    mount_height: float = 0.5
    mount_pitch: float = math.radians(10.0)   # downward tilt
    max_range: float = 30.0
    march_step: float = 0.1
    refine_tol: float = 0.01


@dataclass
class Observation:
    imu_accel: np.ndarray
    imu_gyro: np.ndarray
    roll: float
    pitch: float
    frenet: FrenetState
    scandots: np.ndarray | None = None
    depth: np.ndarray | None = None


def body_rotation(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Body-to-world rotation Rz(yaw) @ Ry(-pitch) @ Rx(roll).

    Positive pitch lifts the nose, positive roll drops the right side.
    """
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, -sp], [0.0, 1.0, 0.0], [sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return rz @ ry @ rx


def scandots(terrain: TerrainModel, state: VehicleState,
             spec: ScanGridSpec | None = None) -> np.ndarray:
    """Heights relative to the vehicle CoM on a yaw-rotated grid.

    Returns (n_lon, n_lat); row 0 is at the CoM, later rows further
    ahead; column order runs left to right. Points off the grid read the
    +max_range sentinel.
    """
    if spec is None:
        spec = ScanGridSpec()
    lon = np.linspace(spec.lon_min, spec.lon_max, spec.n_lon)
    lat = np.linspace(spec.lat_max, spec.lat_min, spec.n_lat)  # left first
    bx, by = np.meshgrid(lon, lat, indexing="ij")
    cy, sy = math.cos(state.yaw), math.sin(state.yaw)
    wx = state.X + bx * cy - by * sy
    wy = state.Y + bx * sy + by * cy
    h = height_at_many(terrain, wx, wy, out_of_extent=np.nan)
    return np.where(np.isnan(h), spec.max_range, h - state.z)


def _ray_cylinder(origin: np.ndarray, dirs: np.ndarray, cx: float, cy: float,
                  radius: float, z_lo: float, z_hi: float,
                  t_max: float) -> np.ndarray:
    """First-hit distances against one capped vertical cylinder.

    Checks the lateral surface within [z_lo, z_hi] and the top cap disk;
    misses report t_max.
    """
    ox = origin[0] - cx
    oy = origin[1] - cy
    dx, dy, dz = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    best = np.full(dx.shape, t_max)

    a = dx * dx + dy * dy
    b = 2.0 * (ox * dx + oy * dy)
    c = ox * ox + oy * oy - radius * radius
    disc = b * b - 4.0 * a * c
    ok = (disc >= 0.0) & (a > 0.0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        for t in ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)):
            z = origin[2] + t * dz
            valid = ok & (t > 1e-9) & (t < best) & (z >= z_lo) & (z <= z_hi)
            best = np.where(valid, t, best)
        # top cap
        t_cap = (z_hi - origin[2]) / dz
        px = origin[0] + t_cap * dx - cx
        py = origin[1] + t_cap * dy - cy
        cap_ok = (np.abs(dz) > 1e-12) & (t_cap > 1e-9) & (t_cap < best) \
            & (px * px + py * py <= radius * radius)
    return np.where(cap_ok, t_cap, best)


def _march_terrain(terrain: TerrainModel, origin: np.ndarray,
                   dirs: np.ndarray, spec: CameraSpec) -> np.ndarray:
    """Fixed-step march to the first below-ground sample, then bisect.

    Positions outside the grid count as no hit (the ground surface only
    exists over the grid).
    """
    n = dirs.shape[0]
    t_hit = np.full(n, spec.max_range)
    lo = np.zeros(n)
    active = np.ones(n, dtype=bool)
    steps = int(math.ceil(spec.max_range / spec.march_step))
    t = 0.0
    for _ in range(steps):
        t_next = min(t + spec.march_step, spec.max_range)
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        px = origin[0] + t_next * dirs[idx, 0]
        py = origin[1] + t_next * dirs[idx, 1]
        pz = origin[2] + t_next * dirs[idx, 2]
        ground = height_at_many(terrain, px, py, out_of_extent=-np.inf)
        below = pz <= ground
        hit = idx[below]
        t_hit[hit] = t_next
        lo[hit] = t
        active[hit] = False
        # rays already above max range stay active until the loop ends
        t = t_next
        if t >= spec.max_range:
            break

    hit_idx = np.nonzero(t_hit < spec.max_range)[0]
    if hit_idx.size:
        a = lo[hit_idx]
        b = t_hit[hit_idx]
        d = dirs[hit_idx]
        iters = max(1, int(math.ceil(math.log2(spec.march_step
                                               / spec.refine_tol))))
        for _ in range(iters):
            mid = 0.5 * (a + b)
            px = origin[0] + mid * d[:, 0]
            py = origin[1] + mid * d[:, 1]
            pz = origin[2] + mid * d[:, 2]
            ground = height_at_many(terrain, px, py, out_of_extent=-np.inf)
            below = pz <= ground
            b = np.where(below, mid, b)
            a = np.where(below, a, mid)
        t_hit[hit_idx] = b
    return t_hit


def camera_rays(state: VehicleState, spec: CameraSpec):
    """(origin, unit direction per pixel) for the mounted camera.

    Row 0 is the top of the image; column azimuths are symmetric so
    column j and width-1-j are exact mirror pairs.
    """
    r = body_rotation(state.yaw, state.pitch, state.roll)
    origin = (np.array([state.X, state.Y, state.z])
              + r @ np.array([0.0, 0.0, spec.mount_height]))

    cols = np.arange(spec.width)
    rows = np.arange(spec.height)
    az = -((cols + 0.5) - spec.width / 2.0) / spec.width * spec.fov_h
    el = ((spec.height / 2.0 - (rows + 0.5)) / spec.height * spec.fov_v
          - spec.mount_pitch)
    el_g, az_g = np.meshgrid(el, az, indexing="ij")
    ce = np.cos(el_g)
    d_body = np.stack([ce * np.cos(az_g), ce * np.sin(az_g),
                       np.sin(el_g)], axis=-1)
    d_world = d_body @ r.T
    return origin, d_world


def render_depth(terrain: TerrainModel, state: VehicleState,
                 spec: CameraSpec | None = None,
                 obstacles=None) -> np.ndarray:
    """Depth image in metres; pixels with no hit read max_range."""
    if spec is None:
        spec = CameraSpec()
    if obstacles is None:
        obstacles = terrain.obstacles
    origin, dirs = camera_rays(state, spec)
    flat = dirs.reshape(-1, 3)
    depth = _march_terrain(terrain, origin, flat, spec)
    for o in obstacles:
        ground = height_at(terrain, o.x, o.y)
        hit = _ray_cylinder(origin, flat, o.x, o.y, o.radius,
                            ground, ground + o.height, spec.max_range)
        depth = np.minimum(depth, hit)
    return depth.reshape(spec.height, spec.width)


def imu(state: VehicleState, prev: VehicleState, dt: float,
        rng: np.random.Generator | None = None, sigma: float = 0.0,
        g: float = 9.81):
    """(specific force, body rates, roll, pitch).

    The accelerometer reads kinematic acceleration minus gravity in the
    body frame: parked on flat ground it reports (0, 0, +g).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    kin = np.array([state.a_x - state.omega * state.v_y,
                    state.a_y + state.omega * state.v_x,
                    0.0])
    r = body_rotation(state.yaw, state.pitch, state.roll)
    gravity_body = r.T @ np.array([0.0, 0.0, -g])
    accel = kin - gravity_body
    gyro = np.array([(state.roll - prev.roll) / dt,
                     (state.pitch - prev.pitch) / dt,
                     state.omega])
    if rng is not None and sigma > 0.0:
        accel = accel + sigma * rng.standard_normal(3)
        gyro = gyro + sigma * rng.standard_normal(3)
    return accel, gyro, state.roll, state.pitch
