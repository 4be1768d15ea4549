"""Site model, image-to-ground-plane calibration and the regular counting grid.

World axes: x east, y north, meters, origin at the south-west corner of the
Mataf bounds.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DegenerateConfiguration,
    InsufficientPairs,
    PointAtInfinity,
    SingularMap,
    UnknownGate,
)

W_EPS = 1e-12
DET_EPS = 1e-12


class ImagePoint(NamedTuple):
    u: float
    v: float


class WorldPoint(NamedTuple):
    x: float
    y: float


class CellIndex(NamedTuple):
    col: int
    row: int


def _normalize_scale(m: np.ndarray) -> np.ndarray:
    # largest-magnitude coefficient becomes exactly +1
    k = int(np.argmax(np.abs(m)))
    return m / m.flat[k]


@dataclass(frozen=True)
class Homography:
    """Projective map from the image plane to the walking plane.

    ``m`` holds the 3x3 matrix row-major. Any nonzero scale is accepted and
    normalized so the largest-magnitude coefficient is 1.
    """

    m: tuple[float, ...]
    rms_error: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.m, dtype=float).reshape(-1)
        if arr.shape != (9,) or not np.all(np.isfinite(arr)):
            raise DataError("homography needs 9 finite coefficients")
        if not np.any(arr):
            raise SingularMap("all-zero homography")
        arr = _normalize_scale(arr.reshape(3, 3))
        if abs(np.linalg.det(arr)) <= DET_EPS:
            raise SingularMap("homography determinant is zero")
        object.__setattr__(self, "m", tuple(float(c) for c in arr.reshape(-1)))

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.m, dtype=float).reshape(3, 3)

    @classmethod
    def from_matrix(cls, mat, rms_error: float = 0.0) -> "Homography":
        return cls(tuple(np.asarray(mat, dtype=float).reshape(-1)), rms_error)

    @classmethod
    def identity(cls) -> "Homography":
        return cls.from_matrix(np.eye(3))


def _hartley(pts: np.ndarray) -> np.ndarray:
    """Similarity that moves points to zero mean and RMS distance sqrt(2)."""
    c = pts.mean(axis=0)
    rms = math.sqrt(float(np.mean(np.sum((pts - c) ** 2, axis=1))))
    if rms < 1e-15:
        raise DegenerateConfiguration("points are coincident")
    s = math.sqrt(2.0) / rms
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def _apply(mat: np.ndarray, pts: np.ndarray) -> np.ndarray:
    hom = np.column_stack([pts, np.ones(len(pts))]) @ mat.T
    return hom[:, :2] / hom[:, 2:3]


def _collinear(a, b, c, tol: float) -> bool:
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    scale = max(math.hypot(b[0] - a[0], b[1] - a[1]) * math.hypot(c[0] - a[0], c[1] - a[1]), 1e-300)
    return abs(cross) <= tol * scale


def _check_points(pts: np.ndarray, what: str) -> None:
    for i, j in itertools.combinations(range(len(pts)), 2):
        if np.allclose(pts[i], pts[j], rtol=0.0, atol=1e-12):
            raise DegenerateConfiguration(f"duplicate {what} points {i} and {j}")
    if len(pts) == 4:
        for a, b, c in itertools.combinations(pts, 3):
            if _collinear(a, b, c, 1e-9):
                raise DegenerateConfiguration(f"three collinear {what} points")


def _split_pairs(pairs) -> tuple[np.ndarray, np.ndarray]:
    img, wld = [], []
    for pair in pairs:
        if len(pair) == 2:
            p, q = pair
            img.append((float(p[0]), float(p[1])))
            wld.append((float(q[0]), float(q[1])))
        else:
            u, v, x, y = pair
            img.append((float(u), float(v)))
            wld.append((float(x), float(y)))
    return np.asarray(img, dtype=float).reshape(-1, 2), np.asarray(wld, dtype=float).reshape(-1, 2)


def fit_homography(pairs: Iterable) -> Homography:
    """Fit an image-to-world homography by the normalized direct linear transform.

    ``pairs`` holds ``(ImagePoint, WorldPoint)`` tuples (or flat
    ``(u, v, x, y)`` quadruples). With more than four pairs the result is the
    algebraic least-squares solution; ``rms_error`` reports the RMS
    reprojection error in meters.
    """
    img, wld = _split_pairs(list(pairs))
    n = len(img)
    if n < 4:
        raise InsufficientPairs(f"need at least 4 correspondences, got {n}")
    if not (np.all(np.isfinite(img)) and np.all(np.isfinite(wld))):
        raise DataError("correspondences must be finite")
    _check_points(img, "image")
    _check_points(wld, "world")

    t_img = _hartley(img)
    t_wld = _hartley(wld)
    a = _apply(t_img, img)
    b = _apply(t_wld, wld)

    rows = np.zeros((2 * n, 9))
    for i, ((u, v), (x, y)) in enumerate(zip(a, b)):
        rows[2 * i] = [u, v, 1.0, 0.0, 0.0, 0.0, -x * u, -x * v, -x]
        rows[2 * i + 1] = [0.0, 0.0, 0.0, u, v, 1.0, -y * u, -y * v, -y]
    _, sv, vt = np.linalg.svd(rows)
    if sv[7] <= 1e-10 * sv[0]:
        raise DegenerateConfiguration("correspondences do not determine a unique map")
    h_norm = vt[-1].reshape(3, 3)
    mat = np.linalg.inv(t_wld) @ h_norm @ t_img
    if abs(np.linalg.det(_normalize_scale(mat))) <= DET_EPS:
        raise DegenerateConfiguration("fitted map is singular")

    resid = _apply(mat, img) - wld
    rms = math.sqrt(float(np.mean(np.sum(resid**2, axis=1))))
    return Homography.from_matrix(mat, rms_error=rms)


def project_points(h: Homography, uv) -> np.ndarray:
    """Vectorized :func:`project_to_plane` over an (n, 2) array."""
    pts = np.asarray(uv, dtype=float).reshape(-1, 2)
    hom = np.column_stack([pts, np.ones(len(pts))]) @ h.matrix.T
    w = hom[:, 2]
    if np.any(np.abs(w) <= W_EPS):
        raise PointAtInfinity("pixel maps to the horizon")
    return hom[:, :2] / w[:, None]


def project_to_plane(h: Homography, p) -> WorldPoint:
    x, y = project_points(h, [p])[0]
    return WorldPoint(float(x), float(y))


def invert(h: Homography) -> Homography:
    try:
        inv = np.linalg.inv(h.matrix)
    except np.linalg.LinAlgError as exc:
        raise SingularMap(str(exc)) from exc
    return Homography.from_matrix(inv)


@dataclass(frozen=True)
class GridSpec:
    origin: WorldPoint
    cell_size: float
    ncols: int
    nrows: int

    def __post_init__(self):
        object.__setattr__(self, "origin", WorldPoint(float(self.origin[0]), float(self.origin[1])))
        if not (self.cell_size > 0 and math.isfinite(self.cell_size)):
            raise ConfigError("cell_size must be positive")
        if self.ncols < 1 or self.nrows < 1:
            raise ConfigError("grid needs at least one row and column")

    @property
    def area(self) -> float:
        return self.cell_size * self.cell_size

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @classmethod
    def covering(cls, bounds: Sequence[float], cell_size: float) -> "GridSpec":
        """Smallest grid anchored at the bounds' south-west corner that covers them."""
        x0, y0, x1, y1 = bounds
        ncols = max(1, math.ceil((x1 - x0) / cell_size - 1e-9))
        nrows = max(1, math.ceil((y1 - y0) / cell_size - 1e-9))
        return cls(WorldPoint(x0, y0), cell_size, ncols, nrows)

    def cell_centers(self) -> np.ndarray:
        """(nrows, ncols, 2) array of cell-center coordinates."""
        s = self.cell_size
        xs = self.origin.x + (np.arange(self.ncols) + 0.5) * s
        ys = self.origin.y + (np.arange(self.nrows) + 0.5) * s
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx, gy], axis=-1)

    def to_dict(self) -> dict:
        return {
            "origin": [self.origin.x, self.origin.y],
            "cell_size": self.cell_size,
            "ncols": self.ncols,
            "nrows": self.nrows,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(WorldPoint(*d["origin"]), float(d["cell_size"]), int(d["ncols"]), int(d["nrows"]))


def _axis_index(coord: np.ndarray, start: float, s: float) -> np.ndarray:
    # floor, then nudge so the half-open inequality holds exactly in floats
    idx = np.floor((coord - start) / s)
    idx = np.where(start + idx * s > coord, idx - 1, idx)
    idx = np.where(start + (idx + 1) * s <= coord, idx + 1, idx)
    return idx


def cells_of(grid: GridSpec, xy) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized cell lookup: returns ``(cols, rows, inside)``.

    Entries of ``cols``/``rows`` where ``inside`` is False are meaningless.
    """
    pts = np.asarray(xy, dtype=float).reshape(-1, 2)
    with np.errstate(invalid="ignore"):
        cols = _axis_index(pts[:, 0], grid.origin.x, grid.cell_size)
        rows = _axis_index(pts[:, 1], grid.origin.y, grid.cell_size)
        inside = (cols >= 0) & (cols < grid.ncols) & (rows >= 0) & (rows < grid.nrows)
    cols = np.where(inside, cols, -1).astype(np.int64)
    rows = np.where(inside, rows, -1).astype(np.int64)
    return cols, rows, inside


def cell_of(grid: GridSpec, p) -> CellIndex | None:
    """Cell holding ``p`` under the half-open convention, or None when outside."""
    cols, rows, inside = cells_of(grid, [p])
    if not inside[0]:
        return None
    return CellIndex(int(cols[0]), int(rows[0]))


Segment = tuple[WorldPoint, WorldPoint]


@dataclass(frozen=True)
class SiteGeometry:
    """Mataf site: circular idealization of the Kaaba wall, bounds, landmarks and gates."""

    wall_center: WorldPoint = WorldPoint(52.5, 77.0)
    wall_radius: float = 7.0
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 105.0, 154.0)
    landmarks: dict[str, WorldPoint] = field(default_factory=dict)
    gates: dict[str, Segment] = field(default_factory=dict)

    def __post_init__(self):
        c = WorldPoint(float(self.wall_center[0]), float(self.wall_center[1]))
        object.__setattr__(self, "wall_center", c)
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        object.__setattr__(
            self, "landmarks", {k: WorldPoint(float(p[0]), float(p[1])) for k, p in self.landmarks.items()}
        )
        object.__setattr__(
            self,
            "gates",
            {
                k: (WorldPoint(float(a[0]), float(a[1])), WorldPoint(float(b[0]), float(b[1])))
                for k, (a, b) in self.gates.items()
            },
        )
        x0, y0, x1, y1 = self.bounds
        if not self.wall_radius > 0:
            raise ConfigError("wall_radius must be positive")
        if not (x1 > x0 and y1 > y0):
            raise ConfigError("bounds must have positive extent")
        r = self.wall_radius
        if c.x - r < x0 or c.x + r > x1 or c.y - r < y0 or c.y + r > y1:
            raise ConfigError("wall circle must lie within the bounds")

    @classmethod
    def default(cls) -> "SiteGeometry":
        """Default Mataf: 105 x 154 m, wall centered, two radial gates east and north."""
        c = WorldPoint(52.5, 77.0)
        r = 7.0
        gates = {
            "east": (WorldPoint(c.x + r, c.y), WorldPoint(105.0, c.y)),
            "north": (WorldPoint(c.x, c.y + r), WorldPoint(c.x, 154.0)),
        }
        return cls(c, r, (0.0, 0.0, 105.0, 154.0), {}, gates)

    def gate(self, name: str) -> Segment:
        try:
            return self.gates[name]
        except KeyError:
            raise UnknownGate(f"unknown gate {name!r}") from None

    def to_dict(self) -> dict:
        return {
            "wall_center": list(self.wall_center),
            "wall_radius": self.wall_radius,
            "bounds": list(self.bounds),
            "landmarks": {k: list(p) for k, p in self.landmarks.items()},
            "gates": {k: [list(a), list(b)] for k, (a, b) in self.gates.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SiteGeometry":
        base = cls.default()
        return cls(
            wall_center=tuple(d.get("wall_center", base.wall_center)),
            wall_radius=float(d.get("wall_radius", base.wall_radius)),
            bounds=tuple(d.get("bounds", base.bounds)),
            landmarks=dict(d.get("landmarks", {})),
            gates={k: (tuple(v[0]), tuple(v[1])) for k, v in d.get("gates", base.to_dict()["gates"]).items()},
        )


def distances_to_wall(geom: SiteGeometry, xy) -> np.ndarray:
    pts = np.asarray(xy, dtype=float).reshape(-1, 2)
    r = np.hypot(pts[:, 0] - geom.wall_center.x, pts[:, 1] - geom.wall_center.y)
    return np.maximum(0.0, r - geom.wall_radius)


def distance_to_wall(geom: SiteGeometry, p) -> float:
    r = math.hypot(p[0] - geom.wall_center.x, p[1] - geom.wall_center.y)
    return max(0.0, r - geom.wall_radius)
