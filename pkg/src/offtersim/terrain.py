"""Procedural trail terrain: sampling, height composition, queries, export.

A terrain is a square height grid composed of four parts evaluated over
world coordinates (x, y) in metres:

  incline plane   x*tan(alpha_x) + y*tan(alpha_y)
  side hills      ramp rising (or dropping) beyond the trail edges
  unevenness      sum of K*K sinusoidal modes gamma[i][j]*sin(2*pi*x/i + 2*pi*y/j)
  noise           per-cell Gaussian, std dev chosen by trail membership

The trail itself follows the cubic centerline y = a0 + b*x + c*x^2 + d*x^3
with a0 fixed at the grid midline. Noise is drawn once per cell at build
time and baked into the grid, so repeated queries and regenerated terrains
are bit-identical for the same seed.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError
from .frenet import Centerline

# metres of cubic-ease blending between trail shoulder and hill ramp
_HILL_BLEND_BAND = 1.0
# attempts to re-draw a tree that landed on the trail before dropping it
_TREE_RETRIES = 100


@dataclass(frozen=True)
class RandomizationRanges:
    """Sampling ranges for terrain parameters, plus fixed grid geometry.

    Two-tuples are closed uniform ranges; collapse one to a point to pin
    the parameter. Densities are per square kilometre.
    """

    b: tuple = (-0.15, 0.15)
    c: tuple = (-8e-4, 8e-4)
    d: tuple = (-1.5e-6, 1.5e-6)
    width: tuple = (4.0, 12.0)
    alpha: tuple = (0.0, 0.15)
    beta_max: float = 0.3
    gamma_max: float = 0.02
    sigma_trail: tuple = (0.005, 0.02)
    sigma_nontrail: tuple = (0.02, 0.08)
    n_modes: int = 8
    grid_size: int = 512
    resolution: float = 0.5
    tree_density: float = 150.0
    rock_density: float = 60.0
    obstacle_radius: tuple = (0.2, 1.0)
    tree_height: tuple = (0.5, 4.0)
    rock_height: tuple = (0.1, 0.5)

    def validate(self):
        for name in ("b", "c", "d", "width", "alpha", "sigma_trail",
                     "sigma_nontrail", "obstacle_radius", "tree_height",
                     "rock_height"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ConfigError(f"range {name} has non-finite bounds")
            if lo > hi:
                raise ConfigError(f"range {name}: min {lo} > max {hi}")
        if self.beta_max < 0 or not math.isfinite(self.beta_max):
            raise ConfigError("beta_max must be finite and >= 0")
        if self.gamma_max < 0 or not math.isfinite(self.gamma_max):
            raise ConfigError("gamma_max must be finite and >= 0")
        if self.n_modes < 1:
            raise ConfigError("n_modes must be >= 1")
        if self.grid_size < 2:
            raise ConfigError("grid_size must be >= 2")
        if self.resolution <= 0:
            raise ConfigError("resolution must be positive")
        if self.tree_density < 0 or self.rock_density < 0:
            raise ConfigError("obstacle densities must be >= 0")


@dataclass(frozen=True)
class TerrainParams:
    """One concrete draw of the terrain randomization."""

    a0: float
    b: float
    c: float
    d: float
    w: float
    alpha_x: float
    alpha_y: float
    beta_left: float
    beta_right: float
    gamma: np.ndarray          # (K, K); gamma[i-1, j-1] is mode (i, j)
    sigma_trail: float
    sigma_nontrail: float
    grid_size: int
    resolution: float
    seed: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gamma"] = self.gamma.tolist()
        return d


@dataclass(frozen=True)
class Obstacle:
    kind: str                  # "tree" or "rock"
    x: float
    y: float
    radius: float
    height: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TerrainModel:
    """Immutable sampled terrain: parameters, baked height grid, obstacles."""

    params: TerrainParams
    heights: np.ndarray        # (M, M), heights[i, j] at (i*res, j*res)
    obstacles: list
    centerline: Centerline

    @property
    def extent(self) -> float:
        """Largest valid x or y coordinate."""
        return (self.params.grid_size - 1) * self.params.resolution


def centerline_y(params: TerrainParams, x) :
    """Trail centerline a0 + b*x + c*x^2 + d*x^3."""
    return params.a0 + x * (params.b + x * (params.c + x * params.d))


def fourier_height(gamma: np.ndarray, x, y):
    """Sum of sinusoidal modes: sum_ij gamma[i][j]*sin(2*pi*x/i + 2*pi*y/j).

    Mode indices i, j run from 1; gamma is indexed zero-based.
    """
    gamma = np.asarray(gamma, dtype=float)
    k = gamma.shape[0]
    if gamma.shape != (k, k):
        raise ConfigError("gamma must be a square matrix")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    for i in range(1, k + 1):
        px = 2.0 * np.pi * x / i
        for j in range(1, k + 1):
            g = gamma[i - 1, j - 1]
            if g != 0.0:
                out = out + g * np.sin(px + 2.0 * np.pi * y / j)
    if out.shape == ():
        return float(out)
    return out


def _hill_profile(beyond: np.ndarray):
    """Ramp height multiplier vs metres beyond the trail shoulder.

    Linear (slope 1) outside the blend band; cubic ease 2u^2 - u^3 inside,
    which matches value and slope at the band edge and leaves the ramp
    exact beyond it.
    """
    u = np.asarray(beyond, dtype=float)
    eased = u * u * (2.0 - u)
    return np.where(u >= _HILL_BLEND_BAND, u, eased)


def _hill_height(params: TerrainParams, offset):
    """Side-hill height from the signed lateral offset (positive right)."""
    off = np.asarray(offset, dtype=float)
    beyond = np.maximum(np.abs(off) - params.w / 2.0, 0.0)
    slope = np.where(off < 0.0, math.tan(params.beta_left),
                     math.tan(params.beta_right))
    return _hill_profile(beyond) * slope


def _deterministic_height(params: TerrainParams, offset, x, y):
    """Everything except the baked noise term."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    incline = x * math.tan(params.alpha_x) + y * math.tan(params.alpha_y)
    return incline + _hill_height(params, offset) + fourier_height(
        params.gamma, x, y)


def compose_height(params: TerrainParams, x: float, y: float,
                   rng: np.random.Generator | None = None,
                   centerline: Centerline | None = None) -> float:
    """Analytic height at one point; optionally adds one Gaussian draw.

    The extent check matches the grid the parameters describe. Passing an
    rng draws a single standard normal scaled by the trail/non-trail std
    dev; the grid builder bakes this term instead.
    """
    ext = (params.grid_size - 1) * params.resolution
    if not (0.0 <= x <= ext and 0.0 <= y <= ext):
        raise DomainError(f"point ({x}, {y}) outside terrain extent [0, {ext}]")
    if centerline is None:
        centerline = Centerline(params.a0, params.b, params.c, params.d, ext)
    off = centerline.signed_offset(x, y)
    h = float(_deterministic_height(params, off, x, y))
    if rng is not None:
        sigma = params.sigma_trail if abs(off) <= params.w / 2.0 \
            else params.sigma_nontrail
        h += sigma * rng.standard_normal()
    return h


def _uniform(rng, bounds):
    # uniform(a, a) returns exactly a, so collapsed ranges pin the value
    lo, hi = bounds
    return float(rng.uniform(lo, hi))


def sample_terrain(seed: int, ranges: RandomizationRanges | None = None) -> TerrainModel:
    """Draw terrain parameters, bake the height grid, place obstacles.

    Everything is a pure function of (seed, ranges); the draw order is
    fixed, so regeneration is bit-identical.
    """
    if ranges is None:
        ranges = RandomizationRanges()
    ranges.validate()
    rng = np.random.default_rng(seed)

    m = ranges.grid_size
    res = ranges.resolution
    ext = (m - 1) * res
    k = ranges.n_modes

    params = TerrainParams(
        a0=m * res / 2.0,
        b=_uniform(rng, ranges.b),
        c=_uniform(rng, ranges.c),
        d=_uniform(rng, ranges.d),
        w=_uniform(rng, ranges.width),
        alpha_x=_uniform(rng, ranges.alpha),
        alpha_y=_uniform(rng, ranges.alpha),
        beta_left=float(rng.uniform(-ranges.beta_max, ranges.beta_max)),
        beta_right=float(rng.uniform(-ranges.beta_max, ranges.beta_max)),
        gamma=rng.uniform(-ranges.gamma_max, ranges.gamma_max, size=(k, k)),
        sigma_trail=_uniform(rng, ranges.sigma_trail),
        sigma_nontrail=_uniform(rng, ranges.sigma_nontrail),
        grid_size=m,
        resolution=res,
        seed=int(seed),
    )

    centerline = Centerline(params.a0, params.b, params.c, params.d, ext)

    xs = np.arange(m) * res
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    offsets = centerline.lateral_offsets_grid(gx, gy)
    heights = _deterministic_height(params, offsets, gx, gy)

    sigma_map = np.where(np.abs(offsets) <= params.w / 2.0,
                         params.sigma_trail, params.sigma_nontrail)
    heights = heights + rng.standard_normal((m, m)) * sigma_map

    obstacles = _place_obstacles(rng, ranges, params, centerline, ext)

    heights.setflags(write=False)
    return TerrainModel(params=params, heights=heights, obstacles=obstacles,
                        centerline=centerline)


def _place_obstacles(rng, ranges, params, centerline, ext):
    area_km2 = (ext / 1000.0) ** 2
    obstacles = []

    n_trees = int(rng.poisson(ranges.tree_density * area_km2))
    for _ in range(n_trees):
        # trees must stand off the trail: re-draw, then give up quietly
        for _ in range(_TREE_RETRIES):
            x = float(rng.uniform(0.0, ext))
            y = float(rng.uniform(0.0, ext))
            if abs(centerline.signed_offset(x, y)) > params.w / 2.0:
                obstacles.append(Obstacle(
                    kind="tree", x=x, y=y,
                    radius=_uniform(rng, ranges.obstacle_radius),
                    height=_uniform(rng, ranges.tree_height)))
                break

    n_rocks = int(rng.poisson(ranges.rock_density * area_km2))
    for _ in range(n_rocks):
        obstacles.append(Obstacle(
            kind="rock",
            x=float(rng.uniform(0.0, ext)),
            y=float(rng.uniform(0.0, ext)),
            radius=_uniform(rng, ranges.obstacle_radius),
            height=_uniform(rng, ranges.rock_height)))
    return obstacles


def _check_extent(terrain: TerrainModel, x: float, y: float):
    ext = terrain.extent
    if not (0.0 <= x <= ext and 0.0 <= y <= ext):
        raise DomainError(f"point ({x}, {y}) outside terrain extent [0, {ext}]")


def height_at(terrain: TerrainModel, x: float, y: float) -> float:
    """Bilinear interpolation of the baked grid."""
    _check_extent(terrain, x, y)
    res = terrain.params.resolution
    m = terrain.params.grid_size
    fx = x / res
    fy = y / res
    i0 = min(int(fx), m - 2)
    j0 = min(int(fy), m - 2)
    tx = fx - i0
    ty = fy - j0
    h = terrain.heights
    return float((1 - tx) * ((1 - ty) * h[i0, j0] + ty * h[i0, j0 + 1])
                 + tx * ((1 - ty) * h[i0 + 1, j0] + ty * h[i0 + 1, j0 + 1]))


def height_at_many(terrain: TerrainModel, x: np.ndarray, y: np.ndarray,
                   out_of_extent: float | None = None) -> np.ndarray:
    """Vectorized height_at for sensor sampling.

    Out-of-extent points raise unless ``out_of_extent`` supplies a fill
    value (sensors use their max-range sentinel).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ext = terrain.extent
    bad = (x < 0.0) | (x > ext) | (y < 0.0) | (y > ext)
    if bad.any() and out_of_extent is None:
        raise DomainError("point outside terrain extent")
    res = terrain.params.resolution
    m = terrain.params.grid_size
    fx = np.clip(x, 0.0, ext) / res
    fy = np.clip(y, 0.0, ext) / res
    i0 = np.minimum(fx.astype(int), m - 2)
    j0 = np.minimum(fy.astype(int), m - 2)
    tx = fx - i0
    ty = fy - j0
    h = terrain.heights
    vals = ((1 - tx) * ((1 - ty) * h[i0, j0] + ty * h[i0, j0 + 1])
            + tx * ((1 - ty) * h[i0 + 1, j0] + ty * h[i0 + 1, j0 + 1]))
    if out_of_extent is not None:
        vals = np.where(bad, out_of_extent, vals)
    return vals


def surface_normal_at(terrain: TerrainModel, x: float, y: float) -> np.ndarray:
    """Unit upward normal from central differences of the height field."""
    _check_extent(terrain, x, y)
    ext = terrain.extent
    h = terrain.params.resolution
    x0, x1 = max(x - h, 0.0), min(x + h, ext)
    y0, y1 = max(y - h, 0.0), min(y + h, ext)
    dhdx = (height_at(terrain, x1, y) - height_at(terrain, x0, y)) / (x1 - x0)
    dhdy = (height_at(terrain, x, y1) - height_at(terrain, x, y0)) / (y1 - y0)
    n = np.array([-dhdx, -dhdy, 1.0])
    return n / np.linalg.norm(n)


def is_on_trail(terrain: TerrainModel, x: float, y: float):
    """(membership, signed lateral offset); the boundary itself is on-trail."""
    off = terrain.centerline.signed_offset(x, y)
    return abs(off) <= terrain.params.w / 2.0, off


# -- export ------------------------------------------------------------


def pgm16_bytes(terrain: TerrainModel) -> bytes:
    """Grid as 16-bit binary PGM bytes.

    Values span the full 16-bit range between the grid min and max; a
    flat grid encodes as all zeros. Sample bytes are big-endian per the
    PGM specification.
    """
    h = terrain.heights
    h_min = float(h.min())
    h_max = float(h.max())
    if h_max > h_min:
        scaled = np.rint((h - h_min) / (h_max - h_min) * 65535.0)
    else:
        scaled = np.zeros_like(h)
    m = terrain.params.grid_size
    header = f"P5\n{m} {m}\n65535\n".encode("ascii")
    return header + scaled.astype(">u2").tobytes()


def pgm16_meta(terrain: TerrainModel) -> dict:
    """Sidecar metadata needed to map pixel values back to heights."""
    h = terrain.heights
    return {
        "h_min": float(h.min()),
        "h_max": float(h.max()),
        "resolution": terrain.params.resolution,
        "seed": terrain.params.seed,
        "params": terrain.params.to_dict(),
    }


def export_pgm16(terrain: TerrainModel, path) -> None:
    """Write the grid as 16-bit binary PGM plus a JSON metadata sidecar."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(pgm16_bytes(terrain))
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(pgm16_meta(terrain), indent=2))


def export_obstacles(terrain: TerrainModel, path) -> None:
    """Write the obstacle list as a JSON array."""
    Path(path).write_text(json.dumps(
        [o.to_dict() for o in terrain.obstacles], indent=2))


def read_pgm16(path):
    """Read back a 16-bit binary PGM written by export_pgm16."""
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise ConfigError("not a binary PGM file")
    parts = raw.split(b"\n", 3)
    w, h = (int(t) for t in parts[1].split())
    maxval = int(parts[2])
    if maxval != 65535:
        raise ConfigError("expected 16-bit PGM")
    img = np.frombuffer(parts[3], dtype=">u2", count=w * h)
    return img.reshape(h, w)
