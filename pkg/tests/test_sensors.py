import math

import numpy as np
import pytest

from conftest import make_flat_terrain, pinned_ranges
from offtersim.dynamics import VehicleParams, VehicleState
from offtersim.sensors import (
    CameraSpec,
    ScanGridSpec,
    body_rotation,
    camera_rays,
    imu,
    render_depth,
    scandots,
)
from offtersim.terrain import Obstacle, TerrainModel, height_at, sample_terrain

PARAMS = VehicleParams()


def vehicle_on(terrain, **kw):
    base = dict(X=60.0, Y=terrain.params.a0, z=PARAMS.com_height)
    base.update(kw)
    return VehicleState(**base)


def with_obstacles(terrain, obstacles):
    return TerrainModel(params=terrain.params, heights=terrain.heights,
                        obstacles=obstacles, centerline=terrain.centerline)


# -- scandots ----------------------------------------------------------


def test_scandots_flat_constant(flat_terrain):
    s = vehicle_on(flat_terrain)
    grid = scandots(flat_terrain, s)
    assert grid.shape == (15, 11)
    assert np.allclose(grid, -PARAMS.com_height, atol=1e-12)


def test_scandots_incline_slope(incline_terrain):
    s = vehicle_on(incline_terrain, X=60.0)
    s = VehicleState(**{**s.to_dict(),
                        "z": height_at(incline_terrain, 60.0, s.Y)
                        + PARAMS.com_height})
    grid = scandots(incline_terrain, s)
    # heading +x on an x grade: rows climb by tan(alpha) per metre
    col = grid[:, 5]
    diffs = np.diff(col)
    assert np.allclose(diffs, math.tan(0.1) * 1.0, atol=1e-9)


def test_scandots_rotate_with_yaw(flat_terrain):
    # build a bumpy terrain and compare rotated samples point by point
    bumpy = sample_terrain(3, pinned_ranges(gamma_max=0.05))
    s = vehicle_on(bumpy, X=64.0, yaw=math.pi / 2)
    grid = scandots(bumpy, s)
    spec = ScanGridSpec()
    lon = np.linspace(spec.lon_min, spec.lon_max, spec.n_lon)
    lat = np.linspace(spec.lat_max, spec.lat_min, spec.n_lat)
    for i in (0, 7, 14):
        for j in (0, 5, 10):
            # yaw pi/2 maps body (x, y) to world (-y, x)
            wx = s.X - lat[j]
            wy = s.Y + lon[i]
            assert grid[i, j] == pytest.approx(
                height_at(bumpy, wx, wy) - s.z, abs=1e-9)


def test_scandots_out_of_extent_sentinel(flat_terrain):
    # near the far corner the forward samples fall off the grid
    s = vehicle_on(flat_terrain, X=flat_terrain.extent - 1.0)
    grid = scandots(flat_terrain, s)
    assert np.any(grid == ScanGridSpec().max_range)
    assert grid[0, 5] == pytest.approx(-PARAMS.com_height)


# -- depth camera ------------------------------------------------------


def test_depth_level_camera_upper_half_max_range(flat_terrain):
    spec = CameraSpec(mount_pitch=0.0)
    s = vehicle_on(flat_terrain)
    img = render_depth(flat_terrain, s, spec)
    origin, dirs = camera_rays(s, spec)
    up = dirs[..., 2] >= 0
    assert np.all(img[up] == spec.max_range)


def test_depth_flat_plane_analytic(flat_terrain):
    spec = CameraSpec()
    s = vehicle_on(flat_terrain)
    img = render_depth(flat_terrain, s, spec)
    origin, dirs = camera_rays(s, spec)
    h = origin[2]
    down = dirs[..., 2] < 0
    expected = np.where(down, h / np.maximum(-dirs[..., 2], 1e-12),
                        spec.max_range)
    expected = np.minimum(expected, spec.max_range)
    assert np.all(np.abs(img[down] - expected[down]) < 0.015)
    assert np.all(img > 0) and np.all(img <= spec.max_range)


def test_depth_cylinder_center_pixel(flat_terrain):
    spec = CameraSpec(mount_pitch=0.0, height=65, width=65)
    # odd image size puts a pixel ray exactly on the optical axis
    s = vehicle_on(flat_terrain)
    cyl_x = s.X + 10.0
    t = with_obstacles(flat_terrain, [Obstacle(
        kind="tree", x=cyl_x, y=s.Y, radius=1.0, height=4.0)])
    img = render_depth(t, s, spec)
    center = img[32, 32]
    # the center ray runs level from the camera straight at the cylinder
    assert center == pytest.approx(10.0 - 1.0, abs=1e-6)


def test_depth_mirror_symmetry(flat_terrain):
    s = vehicle_on(flat_terrain)
    y0 = s.Y
    scene = [Obstacle(kind="tree", x=s.X + 8.0, y=y0 + 3.0, radius=0.8,
                      height=3.0),
             Obstacle(kind="rock", x=s.X + 5.0, y=y0 - 1.5, radius=0.4,
                      height=0.4)]
    mirrored = [Obstacle(kind=o.kind, x=o.x, y=2 * y0 - o.y, radius=o.radius,
                         height=o.height) for o in scene]
    img = render_depth(with_obstacles(flat_terrain, scene), s)
    img_m = render_depth(with_obstacles(flat_terrain, mirrored), s)
    assert np.array_equal(img_m, img[:, ::-1])


def test_depth_mirror_symmetry_on_incline(incline_terrain):
    # x-only grade is symmetric about the trail axis
    s = vehicle_on(incline_terrain)
    s = VehicleState(**{**s.to_dict(),
                        "z": height_at(incline_terrain, s.X, s.Y)
                        + PARAMS.com_height, "pitch": 0.1})
    ranges = pinned_ranges(alpha=0.0)
    x_only = sample_terrain(0, ranges)
    xs = np.arange(x_only.params.grid_size) * x_only.params.resolution
    heights = np.tile((xs * math.tan(0.1))[:, None],
                      (1, x_only.params.grid_size))
    t = TerrainModel(params=x_only.params, heights=heights,
                     obstacles=[], centerline=x_only.centerline)
    img = render_depth(t, s)
    assert np.array_equal(img, img[:, ::-1])


def test_depth_monotone_in_radius(flat_terrain):
    s = vehicle_on(flat_terrain)
    big = with_obstacles(flat_terrain, [Obstacle(
        kind="tree", x=s.X + 8.0, y=s.Y + 1.0, radius=1.0, height=3.0)])
    small = with_obstacles(flat_terrain, [Obstacle(
        kind="tree", x=s.X + 8.0, y=s.Y + 1.0, radius=0.5, height=3.0)])
    img_big = render_depth(big, s)
    img_small = render_depth(small, s)
    assert np.all(img_small >= img_big - 1e-12)


def test_depth_obstacle_behind_terrain_hidden():
    # a rock beyond a rise: the ground hit comes first for low rays
    ranges = pinned_ranges()
    t = sample_terrain(0, ranges)
    n = t.params.grid_size
    xs = np.arange(n) * 0.5
    ridge = np.where((xs > 70) & (xs < 74), 3.0, 0.0)
    heights = np.tile(ridge[:, None], (1, n))
    t = TerrainModel(params=t.params, heights=heights, obstacles=[
        Obstacle(kind="rock", x=80.0, y=t.params.a0, radius=0.5,
                 height=0.5)], centerline=t.centerline)
    s = vehicle_on(t, X=60.0)
    img = render_depth(t, s)
    # centre column: every finite hit is at the ridge or closer
    finite = img[:, 32][img[:, 32] < CameraSpec().max_range]
    assert finite.max() <= math.hypot(74 - 60, 3.0) + 0.5


# -- imu ---------------------------------------------------------------


def test_imu_stationary_flat():
    s = VehicleState()
    accel, gyro, roll, pitch = imu(s, s, 0.02)
    assert np.allclose(accel, [0.0, 0.0, 9.81], atol=1e-12)
    assert np.allclose(gyro, 0.0, atol=1e-12)
    assert roll == 0.0 and pitch == 0.0


def test_imu_constant_velocity_flat():
    s = VehicleState(v_x=5.0)
    accel, gyro, _, _ = imu(s, s, 0.02)
    assert np.allclose(accel, [0.0, 0.0, 9.81], atol=1e-12)


def test_imu_centripetal(flat_terrain):
    from offtersim.dynamics import Action, step

    s = vehicle_on(flat_terrain, X=20.0, v_x=4.0)
    prev = s
    act = Action(steer=0.2)
    for _ in range(300):
        prev, s = s, step(s, act, flat_terrain, PARAMS)
    accel, gyro, _, _ = imu(s, prev, 0.02)
    assert accel[1] == pytest.approx(s.v_x * s.omega, rel=0.05)
    assert gyro[2] == s.omega


def test_imu_attitude_rates(incline_terrain):
    p0 = VehicleState(roll=0.0, pitch=0.0)
    p1 = VehicleState(roll=0.02, pitch=-0.01)
    _, gyro, roll, pitch = imu(p1, p0, 0.02)
    assert gyro[0] == pytest.approx(1.0)
    assert gyro[1] == pytest.approx(-0.5)
    assert roll == 0.02 and pitch == -0.01


def test_imu_tilted_static_reads_gravity_components():
    # static specific force is the reaction holding the body against
    # gravity: nose up reads positive along body x
    s = VehicleState(pitch=0.1)
    accel, _, _, _ = imu(s, s, 0.02)
    assert accel[0] == pytest.approx(9.81 * math.sin(0.1), abs=1e-12)
    assert accel[2] == pytest.approx(9.81 * math.cos(0.1), abs=1e-12)


def test_body_rotation_orthonormal():
    r = body_rotation(0.3, -0.2, 0.1)
    assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(r) == pytest.approx(1.0)
    # positive pitch lifts the nose
    nose = body_rotation(0.0, 0.2, 0.0) @ np.array([1.0, 0.0, 0.0])
    assert nose[2] > 0
    # positive roll lifts the left (+y) side
    left = body_rotation(0.0, 0.0, 0.2) @ np.array([0.0, 1.0, 0.0])
    assert left[2] > 0
