"""Seeded synthetic Tawaf scenarios with exact ground truth.

Agents circle the wall counterclockwise at a fixed radius. Each frame the
local density of every agent's cell is counted, the agent's tangential speed
is its free speed scaled by a non-increasing factor g(rho), and the angle
advances by speed / radius / fps. During standstill windows all speeds are 0.

Random numbers come from numpy's PCG64 bit generator. A root
``SeedSequence(seed)`` is split with ``spawn`` into one child stream per agent
(agent ``i`` uses child ``i``), and each agent draws, in order: free speed,
radial band, radius, angle, then the per-frame radial jitter. The output
therefore does not depend on how agents are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .density import CountField, DensityField, count_frame, density_field
from .errors import FormatVersionError, InvalidScenario, UnknownPreset
from .geometry import GridSpec, SiteGeometry, WorldPoint, cells_of
from .tracks import Cohort, Track

FORMAT_VERSION = "1.0"
BIT_GENERATOR = "PCG64"


@dataclass(frozen=True)
class CohortSpec:
    name: str
    fraction: float
    mu: float
    sigma: float
    sex: str = "unspecified"
    age_class: str = "unspecified"
    mobility: str = "walking"

    @property
    def cohort(self) -> Cohort:
        return Cohort(self.sex, self.age_class, self.mobility, 1)


@dataclass(frozen=True)
class RadialBand:
    """Share ``weight`` of the agents placed uniformly (per unit area) at wall distance [d_lo, d_hi]."""

    d_lo: float
    d_hi: float
    weight: float


@dataclass(frozen=True)
class SpeedRule:
    """g(rho): ``linear`` is max(0, 1 - rho/rho_max); ``constant`` is 1."""

    kind: str = "linear"
    rho_max: float = 10.0

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == "constant":
            return np.ones_like(rho)
        return np.maximum(0.0, 1.0 - rho / self.rho_max)


REFERENCE_COHORTS = (
    CohortSpec("male", 0.45, 1.37, 0.200, sex="male"),
    CohortSpec("female", 0.45, 1.22, 0.106, sex="female"),
    CohortSpec("wheelchair", 0.10, 1.534, 0.177, mobility="wheelchair"),
)

# 70 % of the crowd close to the wall
NEAR_WALL_BANDS = (RadialBand(0.0, 15.0, 0.7), RadialBand(15.0, 40.0, 0.3))


@dataclass(frozen=True)
class Scenario:
    n_agents: int
    duration: float
    fps: float = 25.0
    cohorts: tuple[CohortSpec, ...] = REFERENCE_COHORTS
    bands: tuple[RadialBand, ...] = NEAR_WALL_BANDS
    speed_rule: SpeedRule = SpeedRule()
    standstills: tuple[tuple[float, float], ...] = ()
    seed: int = 0
    cell_size: float = 5.0
    radial_jitter: float = 0.0
    site: SiteGeometry = field(default_factory=SiteGeometry.default)

    def __post_init__(self):
        object.__setattr__(self, "cohorts", tuple(self.cohorts))
        object.__setattr__(self, "bands", tuple(self.bands))
        object.__setattr__(self, "standstills", tuple(tuple(map(float, w)) for w in self.standstills))
        validate_scenario(self)

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.fps)) + 1

    @property
    def grid(self) -> GridSpec:
        return GridSpec.covering(self.site.bounds, self.cell_size)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "n_agents": self.n_agents,
            "duration": self.duration,
            "fps": self.fps,
            "cohorts": [asdict(c) for c in self.cohorts],
            "bands": [asdict(b) for b in self.bands],
            "speed_rule": asdict(self.speed_rule),
            "standstills": [list(w) for w in self.standstills],
            "seed": self.seed,
            "cell_size": self.cell_size,
            "radial_jitter": self.radial_jitter,
            "site": self.site.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        check_format_version(d)
        try:
            return cls(
                n_agents=int(d["n_agents"]),
                duration=float(d["duration"]),
                fps=float(d.get("fps", 25.0)),
                cohorts=tuple(CohortSpec(**c) for c in d.get("cohorts", [asdict(c) for c in REFERENCE_COHORTS])),
                bands=tuple(RadialBand(**b) for b in d.get("bands", [asdict(b) for b in NEAR_WALL_BANDS])),
                speed_rule=SpeedRule(**d.get("speed_rule", {})),
                standstills=tuple(tuple(w) for w in d.get("standstills", [])),
                seed=int(d.get("seed", 0)),
                cell_size=float(d.get("cell_size", 5.0)),
                radial_jitter=float(d.get("radial_jitter", 0.0)),
                site=SiteGeometry.from_dict(d["site"]) if "site" in d else SiteGeometry.default(),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidScenario(f"malformed scenario: {exc}") from exc


def check_format_version(d: dict) -> None:
    v = str(d.get("format_version", FORMAT_VERSION))
    if v.split(".")[0] != FORMAT_VERSION.split(".")[0]:
        raise FormatVersionError(f"unsupported format_version {v}")


def validate_scenario(s: Scenario) -> None:
    if s.n_agents < 0:
        raise InvalidScenario("n_agents must be >= 0")
    if not (s.duration >= 0 and math.isfinite(s.duration)):
        raise InvalidScenario("duration must be >= 0")
    if not s.fps > 0:
        raise InvalidScenario("fps must be positive")
    if not 0 <= s.seed < 2**64:
        raise InvalidScenario("seed must be a 64-bit unsigned integer")
    if not s.cohorts:
        raise InvalidScenario("at least one cohort required")
    if abs(math.fsum(c.fraction for c in s.cohorts) - 1.0) > 1e-9:
        raise InvalidScenario("cohort fractions must sum to 1")
    for c in s.cohorts:
        if c.fraction < 0 or c.sigma < 0 or c.mu < 0:
            raise InvalidScenario(f"bad cohort {c.name}")
        c.cohort  # validates sex/age/mobility
    if not s.bands or any(b.weight < 0 or b.d_lo < 0 or b.d_hi < b.d_lo for b in s.bands):
        raise InvalidScenario("radial bands need 0 <= d_lo <= d_hi and weight >= 0")
    if math.fsum(b.weight for b in s.bands) <= 0:
        raise InvalidScenario("radial band weights sum to zero")
    if s.speed_rule.kind not in ("linear", "constant") or not s.speed_rule.rho_max > 0:
        raise InvalidScenario("speed rule must be linear (rho_max > 0) or constant")
    if any(not w[1] > w[0] for w in s.standstills):
        raise InvalidScenario("standstill windows need t_end > t_start")
    if s.radial_jitter < 0 or not s.cell_size > 0:
        raise InvalidScenario("radial_jitter >= 0 and cell_size > 0 required")


def _largest_remainder(fractions: Sequence[float], n: int) -> list[int]:
    raw = [f * n for f in fractions]
    counts = [int(math.floor(r)) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


@dataclass(frozen=True, eq=False)
class GroundTruth:
    scenario: Scenario
    tracks: list[Track]
    count_fields: list[CountField]
    labels: list[str]
    free_speeds: np.ndarray
    positions: np.ndarray  # (n_frames, n_agents, 2)

    def density_fields(self) -> list[DensityField]:
        return [density_field(c) for c in self.count_fields]


def _cell_density(grid: GridSpec, cf: CountField, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cols, rows, inside = cells_of(grid, pts)
    rho = np.zeros(len(pts))
    rho[inside] = cf.counts[rows[inside], cols[inside]] / grid.area
    key = np.where(inside, rows * grid.ncols + cols, -1)
    return rho, key


def _step_angles(s, grid, cf, pos, theta, v_free, r0, r1, xy) -> np.ndarray:
    # The speed of segment k -> k+1 is set by the density (at frame k) of the
    # cell holding the segment midpoint, the same cell an observer joins it to.
    # One corrector pass handles midpoints that leave the start cell.
    def dtheta(rho):
        return v_free * s.speed_rule(rho) / (s.fps * r0)

    rho0, _ = _cell_density(grid, cf, pos)
    d = dtheta(rho0)
    rho1, key1 = _cell_density(grid, cf, 0.5 * (pos + xy(theta + d, r1)))
    moved = rho1 != rho0
    if moved.any():
        d1 = dtheta(rho1)
        _, key2 = _cell_density(grid, cf, 0.5 * (pos + xy(theta + d1, r1)))
        d = np.where(moved & (key2 == key1), d1, d)
    return d



def generate(s: Scenario) -> GroundTruth:
    validate_scenario(s)
    n, nf = s.n_agents, s.n_frames
    grid = s.grid
    site = s.site
    cx, cy = site.wall_center

    per_cohort = _largest_remainder([c.fraction for c in s.cohorts], n)
    cohort_of = np.repeat(np.arange(len(s.cohorts)), per_cohort)
    band_w = np.array([b.weight for b in s.bands], dtype=float)
    band_cdf = np.cumsum(band_w) / band_w.sum()

    v_free = np.zeros(n)
    radius = np.zeros(n)
    theta = np.zeros(n)
    jitter = np.zeros((nf, n)) if s.radial_jitter > 0 else None
    for i, child in enumerate(np.random.SeedSequence(s.seed).spawn(n)):
        rng = np.random.Generator(np.random.PCG64(child))
        c = s.cohorts[cohort_of[i]]
        v_free[i] = max(0.0, c.mu + c.sigma * rng.standard_normal())
        b = s.bands[min(int(np.searchsorted(band_cdf, rng.random(), side="right")), len(s.bands) - 1)]
        r_lo, r_hi = site.wall_radius + b.d_lo, site.wall_radius + b.d_hi
        radius[i] = math.sqrt(r_lo**2 + rng.random() * (r_hi**2 - r_lo**2))
        theta[i] = 2.0 * math.pi * rng.random()
        if jitter is not None:
            jitter[:, i] = s.radial_jitter * rng.standard_normal(nf)

    radii = np.broadcast_to(radius, (nf, n))
    if jitter is not None:
        radii = np.maximum(site.wall_radius, radius + jitter)

    def xy(th, r):
        return np.column_stack([cx + r * np.cos(th), cy + r * np.sin(th)])

    positions = np.empty((nf, n, 2))
    fields = []
    for k in range(nf):
        pos = xy(theta, radii[k])
        positions[k] = pos
        cf = count_frame(grid, pos, frame=k)
        fields.append(cf)
        if k == nf - 1:
            break
        t = k / s.fps
        if any(t0 <= t < t1 for t0, t1 in s.standstills):
            continue
        theta = theta + _step_angles(s, grid, cf, pos, theta, v_free, radii[k], radii[k + 1], xy)

    frames = np.arange(nf)
    width = max(1, len(str(max(n - 1, 0))))
    tracks = [
        Track(f"a{i:0{width}d}", frames, positions[:, i, :].copy(), s.cohorts[cohort_of[i]].cohort)
        for i in range(n)
    ]
    labels = [s.cohorts[j].name for j in cohort_of]
    return GroundTruth(s, tracks, fields, labels, v_free, positions)


PRESETS = {
    # no density coupling: speeds stay at the free speeds, densities stay below 3 / m^2
    "free_flow": dict(
        n_agents=3000,
        duration=60.0,
        fps=10.0,
        bands=NEAR_WALL_BANDS,
        speed_rule=SpeedRule("constant"),
        seed=20091127,
    ),
    # one prayer pause from t = 60 s to t = 120 s
    "prayer": dict(
        n_agents=2000,
        duration=180.0,
        fps=5.0,
        bands=NEAR_WALL_BANDS,
        speed_rule=SpeedRule("linear", 10.0),
        standstills=((60.0, 120.0),),
        seed=20091128,
    ),
    # near-wall density around 7-8 / m^2, decaying to about 2 / m^2 at 40-55 m
    "rush_hour": dict(
        n_agents=0,  # filled from the band densities below
        duration=10.0,
        fps=5.0,
        speed_rule=SpeedRule("linear", 10.0),
        seed=20091129,
    ),
    # single free speed; densities spread over 0-8 / m^2 but stay below the jam point g = 0
    "fd_probe": dict(
        n_agents=2000,
        duration=60.0,
        fps=25.0,
        cohorts=(CohortSpec("all", 1.0, 1.37, 0.0),),
        bands=(RadialBand(0.0, 2.0, 0.27), RadialBand(2.0, 6.0, 0.3), RadialBand(6.0, 40.0, 0.43)),
        speed_rule=SpeedRule("linear", 10.0),
        seed=20091130,
    ),
}

# (d_lo, d_hi, target persons/m^2) for rush hour
RUSH_HOUR_PROFILE = (
    (0.0, 5.0, 9.5),
    (5.0, 10.0, 6.0),
    (10.0, 20.0, 4.5),
    (20.0, 30.0, 3.5),
    (30.0, 40.0, 2.5),
    (40.0, 55.0, 2.0),
)


def bands_for_profile(profile, wall_radius: float) -> tuple[int, tuple[RadialBand, ...]]:
    """Agent count and band weights that realize target densities per wall-distance band."""
    counts = []
    for d_lo, d_hi, rho in profile:
        area = math.pi * ((wall_radius + d_hi) ** 2 - (wall_radius + d_lo) ** 2)
        counts.append(int(round(rho * area)))
    total = sum(counts)
    return total, tuple(RadialBand(lo, hi, c / total) for (lo, hi, _), c in zip(profile, counts))


def preset(name: str, **overrides) -> Scenario:
    """Named scenario mirroring a regime observed on the Mataf."""
    if name not in PRESETS:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    params = dict(PRESETS[name])
    if name == "rush_hour":
        site = SiteGeometry.default()
        n, bands = bands_for_profile(RUSH_HOUR_PROFILE, site.wall_radius)
        params.update(n_agents=n, bands=bands)
    params.update(overrides)
    return Scenario(**params)


def uniform_stream(
    density: float,
    speed: float,
    width: float = 10.0,
    duration: float = 60.0,
    fps: float = 25.0,
    seed: int = 0,
    margin: float = 10.0,
) -> tuple[list[Track], SiteGeometry]:
    """Straight eastward stream of uniform density across a corridor.

    The corridor spans y in [0, width]; gate ``line`` is x = 0 across it.
    Agents start uniformly in x in [-speed*duration - margin, margin] so the
    expected number of crossings during [0, duration) is
    density * width * speed * duration.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    span = speed * duration + 2 * margin
    n = int(round(density * width * span))
    x0 = -speed * duration - margin + span * rng.random(n)
    y = width * rng.random(n)
    nf = int(round(duration * fps))
    tracks = [
        Track(f"s{i:05d}", [0, nf], [[x0[i], y[i]], [x0[i] + speed * nf / fps, y[i]]])
        for i in range(n)
    ]
    x_hi = speed * duration + margin
    lo = -speed * duration - margin
    site = SiteGeometry(
        wall_center=WorldPoint(lo + 1.0, -1.0),
        wall_radius=0.5,
        bounds=(lo, -2.0, x_hi + speed * duration, width + 2.0),
        gates={"line": (WorldPoint(0.0, 0.0), WorldPoint(0.0, width))},
    )
    return tracks, site
