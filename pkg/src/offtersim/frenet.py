"""Projection of world poses onto the trail centerline.

The centerline is the cubic y = a0 + b*x + c*x**2 + d*x**3 over a bounded
x interval. The projected state is expressed in trail coordinates: arc
length ``s``, signed lateral offset ``x_lat`` (positive on the right of
the travel direction), heading error ``theta`` (yaw minus tangent angle,
counter-clockwise positive), plus the body velocities and the centerline
curvature at the nearest point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import OffTerSimError

# dense-seed count for the nearest-point search, see nearest_x()
_N_SEED_SAMPLES = 256
# knots for the cached arc-length table
_N_ARC_KNOTS = 1024


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]; ties at -pi map to +pi."""
    w = math.remainder(a, 2.0 * math.pi)
    if w == -math.pi:
        w = math.pi
    return w


@dataclass
class FrenetState:
    """Vehicle state relative to the trail centerline.

    s: arc length along the centerline [m]
    x_lat: signed lateral distance, positive on the right of travel [m]
    theta: heading error vs the centerline tangent, in (-pi, pi] [rad]
    v: body longitudinal speed [m/s]
    v_perp: body lateral speed, positive left (body +y) [m/s]
    omega: yaw rate, counter-clockwise positive [rad/s]
    c: signed centerline curvature at the nearest point [1/m]
    """

    s: float
    x_lat: float
    theta: float
    v: float
    v_perp: float
    omega: float
    c: float

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "x_lat": self.x_lat,
            "theta": self.theta,
            "v": self.v,
            "v_perp": self.v_perp,
            "omega": self.omega,
            "c": self.c,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrenetState":
        return cls(**{k: float(d[k]) for k in
                      ("s", "x_lat", "theta", "v", "v_perp", "omega", "c")})


class Centerline:
    """Cubic trail centerline with a cached arc-length table.

    Arc length s(x) = integral of sqrt(1 + f'(t)^2) is evaluated by
    adaptive quadrature (abs tolerance 1e-6 m) between 1024 knots and
    linearly interpolated in between; the inverse map x(s) reads the
    same table backwards.
    """

    def __init__(self, a0: float, b: float, c: float, d: float, x_max: float):
        if x_max <= 0:
            raise ValueError("x_max must be positive")
        self.a0 = float(a0)
        self.b = float(b)
        self.c = float(c)
        self.d = float(d)
        self.x_max = float(x_max)
        # arc-length table is built on first use; offset-only callers
        # (terrain noise masking) never pay for the quadrature
        self._x_knots = None
        self._s_knots = None

    def _ensure_arc_table(self):
        if self._s_knots is not None:
            return
        xs = np.linspace(0.0, self.x_max, _N_ARC_KNOTS)
        ds = [0.0]
        for x0, x1 in zip(xs[:-1], xs[1:]):
            seg, _ = quad(self._speed, x0, x1, epsabs=1e-6, epsrel=1e-10)
            ds.append(seg)
        self._x_knots = xs
        self._s_knots = np.cumsum(ds)

    def _speed(self, x: float) -> float:
        return math.sqrt(1.0 + self.slope(x) ** 2)

    @property
    def length(self) -> float:
        """Total arc length over the x interval."""
        self._ensure_arc_table()
        return float(self._s_knots[-1])

    def y(self, x):
        """Centerline lateral position a0 + b*x + c*x^2 + d*x^3."""
        return self.a0 + x * (self.b + x * (self.c + x * self.d))

    def slope(self, x):
        return self.b + x * (2.0 * self.c + x * 3.0 * self.d)

    def second_derivative(self, x):
        return 2.0 * self.c + 6.0 * self.d * x

    def curvature(self, x):
        """Signed curvature of y = f(x): f'' / (1 + f'^2)^(3/2)."""
        fp = self.slope(x)
        return self.second_derivative(x) / (1.0 + fp * fp) ** 1.5

    def tangent_angle(self, x):
        return np.arctan(self.slope(x))

    def arc_length(self, x: float) -> float:
        """s(x) from the cached table (clamped to the x interval)."""
        self._ensure_arc_table()
        return float(np.interp(x, self._x_knots, self._s_knots))

    def x_of_arc_length(self, s: float) -> float:
        """Inverse of arc_length, clamped to the table range."""
        self._ensure_arc_table()
        return float(np.interp(s, self._s_knots, self._x_knots))

    def point_at_arc_length(self, s: float, offset: float = 0.0):
        """World point at arc length s, shifted ``offset`` to the right."""
        x = self.x_of_arc_length(s)
        y = self.y(x)
        if offset != 0.0:
            fp = self.slope(x)
            inv = 1.0 / math.sqrt(1.0 + fp * fp)
            # right-hand normal of the unit tangent (1, f')/|.| is (f', -1)/|.|
            x += offset * fp * inv
            y -= offset * inv
        return x, y

    # -- nearest point -------------------------------------------------

    def nearest_x(self, px: float, py: float) -> float:
        """x of the curve point nearest to (px, py).

        Seeds with the best of 256 uniform samples, then refines the
        stationarity condition d(dist^2)/dx = 0 with damped Newton steps.
        Steps that would increase the distance are halved away, so the
        result is never worse than the best seed.
        """
        xs = np.linspace(0.0, self.x_max, _N_SEED_SAMPLES)
        d2 = (xs - px) ** 2 + (self.y(xs) - py) ** 2
        x = float(xs[int(np.argmin(d2))])
        best = self._dist2(x, px, py)

        for _ in range(60):
            g = self._half_grad(x, px, py)
            if abs(2.0 * g) < 1e-10:
                break
            h = self._half_hess(x, px, py)
            if h > 1e-12:
                step = -g / h
            else:
                step = -math.copysign(self.x_max / _N_SEED_SAMPLES, g)
            accepted = False
            for _ in range(30):
                cand = min(max(x + step, 0.0), self.x_max)
                val = self._dist2(cand, px, py)
                if val <= best and cand != x:
                    x, best, accepted = cand, val, True
                    break
                if cand == x:
                    break
                step *= 0.5
            if not accepted:
                break
        return x

    def _dist2(self, x, px, py):
        dy = self.y(x) - py
        return (x - px) ** 2 + dy * dy

    def _half_grad(self, x, px, py):
        # half of d(dist^2)/dx
        return (x - px) + self.slope(x) * (self.y(x) - py)

    def _half_hess(self, x, px, py):
        fp = self.slope(x)
        return 1.0 + fp * fp + self.second_derivative(x) * (self.y(x) - py)

    def signed_offset(self, px: float, py: float,
                      x_near: float | None = None) -> float:
        """Perpendicular offset of (px, py), positive on the right of travel.

        With unit tangent t and offset vector o from the nearest curve
        point, the z component of t x o is positive when the point lies
        left of travel; the returned offset is its negation.
        """
        if x_near is None:
            x_near = self.nearest_x(px, py)
        fp = self.slope(x_near)
        inv = 1.0 / math.sqrt(1.0 + fp * fp)
        ox = px - x_near
        oy = py - self.y(x_near)
        cross_z = (oy - fp * ox) * inv
        return -cross_z

    def lateral_offsets_grid(self, px: np.ndarray, py: np.ndarray) -> np.ndarray:
        """Vectorized signed offsets for many query points.

        Nearest points are seeded with a KD-tree over 2048 dense curve
        samples and refined with a few vectorized Newton steps; used by
        the terrain builder where per-point seeding would be too slow.
        """
        from scipy.spatial import cKDTree

        xs = np.linspace(0.0, self.x_max, 2048)
        tree = cKDTree(np.column_stack([xs, self.y(xs)]))
        fx = np.asarray(px, dtype=float).ravel()
        fy = np.asarray(py, dtype=float).ravel()
        _, idx = tree.query(np.column_stack([fx, fy]))
        x = xs[idx]
        for _ in range(12):
            fp = self.slope(x)
            g = (x - fx) + fp * (self.y(x) - fy)
            h = 1.0 + fp * fp + self.second_derivative(x) * (self.y(x) - fy)
            h = np.where(np.abs(h) < 1e-9, 1.0, h)
            x = np.clip(x - g / h, 0.0, self.x_max)
        fp = self.slope(x)
        inv = 1.0 / np.sqrt(1.0 + fp * fp)
        cross_z = ((fy - self.y(x)) - fp * (fx - x)) * inv
        return (-cross_z).reshape(np.shape(px))


def project(centerline: Centerline, px: float, py: float, yaw: float,
            v_x: float, v_y: float, omega: float) -> FrenetState:
    """Project a world pose and body velocities onto the centerline."""
    x = centerline.nearest_x(px, py)
    x_lat = centerline.signed_offset(px, py, x_near=x)
    if not math.isfinite(x_lat):
        raise OffTerSimError("nearest-point search produced a non-finite offset")
    theta = wrap_angle(yaw - math.atan(centerline.slope(x)))
    return FrenetState(
        s=centerline.arc_length(x),
        x_lat=x_lat,
        theta=theta,
        v=v_x,
        v_perp=v_y,
        omega=omega,
        c=float(centerline.curvature(x)),
    )
