"""Grid counts, local density fields, density maps, radial profiles and line flows.

Density is piecewise constant per cell: a cell's head count divided by its
area. Heads are points; a head on a cell's lower/left edge belongs to that
cell, on its upper/right edge to the neighbour.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import BadPalette, ConfigError, EmptyInput, GridMismatch
from .geometry import GridSpec, SiteGeometry, cells_of, distances_to_wall
from .tracks import DEFAULT_FPS, TrackSet, gate_crossings

CRITICAL_DENSITY = 8.0  # persons/m^2, upper end of the observed critical range
SENTINEL = -1


@dataclass(frozen=True, eq=False)
class CountField:
    grid: GridSpec
    frame: int
    counts: np.ndarray  # (nrows, ncols) int64
    outside: int = 0

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.outside


@dataclass(frozen=True, eq=False)
class DensityField:
    grid: GridSpec
    time_label: float
    rho: np.ndarray  # (nrows, ncols) persons/m^2

    def mass(self) -> float:
        """Total persons represented, sum(rho * A)."""
        return math.fsum((self.rho * self.grid.area).ravel())


def count_frame(grid: GridSpec, positions, frame: int = 0) -> CountField:
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    cols, rows, inside = cells_of(grid, pts)
    flat = rows[inside] * grid.ncols + cols[inside]
    counts = np.bincount(flat, minlength=grid.nrows * grid.ncols).reshape(grid.shape)
    return CountField(grid, int(frame), counts.astype(np.int64), int(len(pts) - inside.sum()))


def density_field(c: CountField) -> DensityField:
    return DensityField(c.grid, c.frame, c.counts / c.grid.area)


def average_density(fields: Sequence[DensityField], time_label=None) -> DensityField:
    """Cellwise mean with exactly rounded sums, so the result ignores input order."""
    fields = list(fields)
    if not fields:
        raise EmptyInput("no density fields to average")
    grid = fields[0].grid
    if any(f.grid != grid for f in fields):
        raise GridMismatch("density fields use different grids")
    stacked = np.stack([f.rho for f in fields]).reshape(len(fields), -1)
    sums = np.array([math.fsum(col) for col in stacked.T])
    label = fields[0].time_label if time_label is None else time_label
    return DensityField(grid, label, (sums / len(fields)).reshape(grid.shape))


class Ring(NamedTuple):
    r_lo: float
    r_hi: float
    mean_density: float
    area: float
    count: float


@dataclass(frozen=True)
class RadialProfile:
    ring_width: float
    rings: list[Ring]


def radial_profile(f: DensityField, geom: SiteGeometry, ring_width: float = 5.0) -> RadialProfile:
    """Ring-averaged density versus distance from the wall.

    Cells go to the ring holding their center's wall distance. Rings with no
    cells report zero area and zero density.
    """
    if not ring_width > 0:
        raise ConfigError("ring_width must be positive")
    d = distances_to_wall(geom, f.grid.cell_centers().reshape(-1, 2))
    ring = np.floor(d / ring_width).astype(np.int64)
    nring = int(ring.max()) + 1
    area = f.grid.area
    mass = (f.rho * area).ravel()
    rings = []
    for k in range(nring):
        sel = ring == k
        n = int(sel.sum())
        cnt = math.fsum(mass[sel])
        a = n * area
        rings.append(Ring(k * ring_width, (k + 1) * ring_width, cnt / a if n else 0.0, a, cnt))
    return RadialProfile(ring_width, rings)


# green -> yellow -> red over eight density steps
_DEFAULT_COLORS = (
    (0, 160, 0),
    (96, 192, 0),
    (170, 215, 0),
    (235, 235, 0),
    (255, 190, 0),
    (255, 130, 0),
    (240, 60, 0),
    (200, 0, 0),
)


@dataclass(frozen=True)
class Palette:
    breakpoints: tuple[float, ...]
    colors: tuple[tuple[int, int, int], ...]
    unpainted: tuple[int, int, int] = (255, 255, 255)

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "colors", tuple(tuple(int(v) for v in c) for c in self.colors))
        if not bp:
            raise BadPalette("palette has no breakpoints")
        if len(bp) != len(self.colors):
            raise BadPalette("one color per breakpoint required")
        if bp[0] <= 0 or any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise BadPalette("breakpoints must be strictly increasing and start above 0")
        for c in (*self.colors, self.unpainted):
            if len(c) != 3 or any(not 0 <= v <= 255 for v in c):
                raise BadPalette(f"bad RGB color {c}")

    @classmethod
    def default(cls) -> "Palette":
        return cls(tuple(float(i) for i in range(1, 9)), _DEFAULT_COLORS)


@dataclass(frozen=True, eq=False)
class Raster:
    """Color indices per cell; ``SENTINEL`` marks cells that are not painted."""

    values: np.ndarray
    palette: Palette

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    def to_ppm(self) -> str:
        """Plain-text P3 pixmap, one pixel per cell, north row first."""
        lut = np.array([*self.palette.colors, self.palette.unpainted], dtype=np.int64)
        rgb = lut[np.where(self.values == SENTINEL, len(self.palette.colors), self.values)]
        lines = ["P3", f"{self.ncols} {self.nrows}", "255"]
        for row in rgb[::-1]:
            lines.append(" ".join(f"{r} {g} {b}" for r, g, b in row))
        return "\n".join(lines) + "\n"


def render_density_map(f: DensityField, palette: Palette | None = None) -> Raster:
    palette = palette or Palette.default()
    idx = np.searchsorted(np.asarray(palette.breakpoints), f.rho, side="right") - 1
    idx = np.where(f.rho > 0, idx, SENTINEL)
    return Raster(idx.astype(np.int64), palette)


@dataclass(frozen=True)
class FlowMeasurement:
    line: str
    t0: float
    t1: float
    crossings: int
    q_line: float
    q_specific: float

    @property
    def window(self) -> float:
        return self.t1 - self.t0


def flow_across_line(
    tracks: TrackSet,
    geom: SiteGeometry,
    gate: str,
    window: tuple[float, float],
    fps: float = DEFAULT_FPS,
) -> FlowMeasurement:
    """Count gate crossings whose interpolated time falls in ``[t0, t1)``."""
    t0, t1 = window
    if not t1 > t0:
        raise ConfigError("flow window needs t1 > t0")
    a, b = geom.gate(gate)
    length = math.hypot(b[0] - a[0], b[1] - a[1])
    if not length > 0:
        raise ConfigError(f"gate {gate!r} has zero length")
    n = 0
    for t in tracks:
        f, _ = gate_crossings(t.frames, t.xy, a, b)
        tc = f / fps
        n += int(np.count_nonzero((tc >= t0) & (tc < t1)))
    q = n / (t1 - t0)
    return FlowMeasurement(gate, float(t0), float(t1), n, q, q / length)


def count_accuracy(estimated: CountField, truth: CountField) -> float:
    """Percent agreement: 100 * (1 - sum|est - truth| / max(1, sum truth)), clamped."""
    if estimated.grid != truth.grid:
        raise GridMismatch("count fields use different grids")
    err = int(np.abs(estimated.counts - truth.counts).sum())
    score = 100.0 * (1.0 - err / max(1, int(truth.counts.sum())))
    return min(100.0, max(0.0, score))
