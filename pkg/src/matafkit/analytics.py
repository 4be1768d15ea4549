"""Speed statistics, fundamental diagram, edge effect, path oscillation and
mean-speed time series."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .density import DensityField
from .errors import (
    ConfigError,
    EmptyReference,
    EmptyRing,
    GridMismatch,
    NoOverlap,
    TooFewKeyframes,
    TooFewSamples,
)
from .geometry import SiteGeometry, cells_of, distances_to_wall
from .tracks import DEFAULT_FPS, Track, TrackSet, mean_track_speed, pooled_speeds

DEFAULT_BIN_WIDTH = 0.5
DEFAULT_MIN_BIN_N = 10
DEFAULT_INNER_RING = (0.0, 10.0)
DEFAULT_OUTER_RING = (40.0, 55.0)
DEFAULT_BUCKET = 10.0
DEFAULT_STANDSTILL = 0.05


def _mean(x: np.ndarray) -> float:
    # exactly rounded sum; clamping keeps constant samples exact
    m = math.fsum(x) / len(x)
    return min(max(m, float(np.min(x))), float(np.max(x)))


@dataclass(frozen=True)
class CohortStats:
    cohort: str
    n: int
    mu: float
    sigma: float
    p85_exceeded: float  # 15th percentile: the speed 85% of samples exceed


def fit_normal(samples, cohort: str = "all") -> CohortStats:
    """Moment fit of a normal distribution (sample mean, n-1 standard deviation)."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if len(x) < 2:
        raise TooFewSamples(f"need at least 2 samples, got {len(x)}")
    mu = _mean(x)
    sigma = math.sqrt(math.fsum((x - mu) ** 2) / (len(x) - 1))
    p15 = float(np.percentile(x, 15.0, method="linear"))
    return CohortStats(cohort, len(x), mu, sigma, p15)


def cohort_stats(tracks: TrackSet, fps: float = DEFAULT_FPS, include_all: bool = True) -> list[CohortStats]:
    """Fit per-cohort speed distributions to the tracks' whole-path average speeds.

    Cohorts with fewer than two usable tracks are left out.
    """
    groups: dict[str, list[float]] = {}
    for t in tracks:
        if len(t) < 2 or t.last_frame == t.first_frame:
            continue
        groups.setdefault(t.cohort.label, []).append(mean_track_speed(t, fps))
    out = [fit_normal(v, k) for k, v in sorted(groups.items()) if len(v) >= 2]
    pooled = [s for v in groups.values() for s in v]
    if include_all and len(pooled) >= 2:
        out.append(fit_normal(pooled, "all"))
    return out


class FDBin(NamedTuple):
    rho_lo: float
    rho_hi: float
    mean_rho: float
    mean_speed: float
    n: int
    sparse: bool


@dataclass(frozen=True)
class FundamentalDiagram:
    bin_width: float
    min_bin_n: int
    bins: list[FDBin]
    dropped: int

    @property
    def n_included(self) -> int:
        return sum(b.n for b in self.bins)

    def dense_bins(self) -> list[FDBin]:
        return [b for b in self.bins if not b.sparse]


def _nearest_index(times: np.ndarray, t: np.ndarray) -> np.ndarray:
    # ties go to the earlier field
    hi = np.clip(np.searchsorted(times, t, side="left"), 0, len(times) - 1)
    lo = np.clip(hi - 1, 0, len(times) - 1)
    return np.where(np.abs(t - times[lo]) <= np.abs(times[hi] - t), lo, hi)


def local_densities(
    samples_pos: np.ndarray, samples_frame: np.ndarray, fields: Sequence[DensityField]
) -> tuple[np.ndarray, np.ndarray]:
    """Density at each sample's cell in the nearest-in-time field.

    Returns ``(rho, inside)``; ``rho`` is NaN where the sample falls outside the grid.
    """
    fields = sorted(fields, key=lambda f: f.time_label)
    grid = fields[0].grid
    if any(f.grid != grid for f in fields):
        raise GridMismatch("density fields use different grids")
    times = np.array([float(f.time_label) for f in fields])
    stack = np.stack([f.rho for f in fields])
    which = _nearest_index(times, samples_frame)
    cols, rows, inside = cells_of(grid, samples_pos)
    rho = np.full(len(samples_frame), np.nan)
    rho[inside] = stack[which[inside], rows[inside], cols[inside]]
    return rho, inside


def fundamental_diagram(
    tracks: TrackSet,
    fields: Sequence[DensityField],
    fps: float = DEFAULT_FPS,
    bin_width: float = DEFAULT_BIN_WIDTH,
    min_bin_n: int = DEFAULT_MIN_BIN_N,
) -> FundamentalDiagram:
    """Bin segment speeds by the local density at their midpoints."""
    if not bin_width > 0:
        raise ConfigError("bin_width must be positive")
    samples = pooled_speeds(tracks, fps)
    if len(samples) == 0 or not fields:
        raise NoOverlap("no speed samples or no density fields")
    rho, inside = local_densities(samples.pos, samples.mid_frame, fields)
    if not inside.any():
        raise NoOverlap("no speed sample falls on the density grid")
    rho_in = rho[inside]
    v_in = samples.speed[inside]
    k = np.floor(rho_in / bin_width).astype(np.int64)
    nb = int(k.max()) + 1
    n = np.bincount(k, minlength=nb)
    sum_rho = np.bincount(k, weights=rho_in, minlength=nb)
    sum_v = np.bincount(k, weights=v_in, minlength=nb)
    bins = []
    for i in range(nb):
        if n[i]:
            mr, mv = sum_rho[i] / n[i], sum_v[i] / n[i]
        else:
            mr = mv = math.nan
        bins.append(FDBin(i * bin_width, (i + 1) * bin_width, float(mr), float(mv), int(n[i]), bool(n[i] < min_bin_n)))
    return FundamentalDiagram(bin_width, min_bin_n, bins, int(len(samples) - inside.sum()))


class Comparison(NamedTuple):
    rho: float
    v_measured: float
    v_ref: float
    delta: float


def compare_reference(fd: FundamentalDiagram, ref) -> list[Comparison]:
    """Measured bin speeds against a reference speed-density curve (linear, clamped ends)."""
    ref = np.asarray(ref, dtype=float).reshape(-1, 2)
    if len(ref) == 0:
        raise EmptyReference("reference curve is empty")
    if np.any(np.diff(ref[:, 0]) <= 0):
        raise ConfigError("reference densities must be strictly increasing")
    out = []
    for b in fd.dense_bins():
        v_ref = float(np.interp(b.mean_rho, ref[:, 0], ref[:, 1]))
        out.append(Comparison(b.mean_rho, b.mean_speed, v_ref, b.mean_speed - v_ref))
    return out


@dataclass(frozen=True)
class EdgeEffectReport:
    inner: tuple[float, float]
    outer: tuple[float, float]
    mean_speed_inner: float
    mean_speed_outer: float
    n_inner: int
    n_outer: int
    ratio: float
    edge_effect_present: bool


def edge_center_contrast(
    tracks: TrackSet,
    geom: SiteGeometry,
    inner: tuple[float, float] = DEFAULT_INNER_RING,
    outer: tuple[float, float] = DEFAULT_OUTER_RING,
    fps: float = DEFAULT_FPS,
) -> EdgeEffectReport:
    """Mean segment speed in a ring near the wall versus a ring further out.

    Rings are half-open ``[r_lo, r_hi)`` intervals of wall distance.
    """
    if not (inner[0] < inner[1] and outer[0] < outer[1]):
        raise ConfigError("rings need r_lo < r_hi")
    if not inner[1] <= outer[0]:
        raise ConfigError("inner ring must lie closer to the wall than the outer ring, without overlap")
    s = pooled_speeds(tracks, fps)
    d = distances_to_wall(geom, s.pos)
    sel_in = (d >= inner[0]) & (d < inner[1])
    sel_out = (d >= outer[0]) & (d < outer[1])
    if not sel_in.any():
        raise EmptyRing(f"no speed samples in inner ring {inner}")
    if not sel_out.any():
        raise EmptyRing(f"no speed samples in outer ring {outer}")
    m_in = _mean(s.speed[sel_in])
    m_out = _mean(s.speed[sel_out])
    ratio = m_out / m_in if m_in > 0 else math.inf
    return EdgeEffectReport(
        tuple(inner), tuple(outer), m_in, m_out, int(sel_in.sum()), int(sel_out.sum()), ratio, m_out > m_in
    )


def oscillation_metric(t: Track, geom: SiteGeometry, window: int = 5) -> float:
    """RMS deviation of the wall distance from its centered moving average (meters)."""
    if window < 3 or window % 2 == 0:
        raise ConfigError("window must be odd and >= 3")
    if len(t) < window:
        raise TooFewKeyframes(f"track {t.id} has {len(t)} keyframes, window needs {window}")
    r = distances_to_wall(geom, t.xy)
    trend = np.convolve(r, np.full(window, 1.0 / window), mode="valid")
    h = window // 2
    resid = r[h : len(r) - h] - trend
    return math.sqrt(math.fsum(resid**2) / len(resid))


class SeriesPoint(NamedTuple):
    t_mid: float
    mean_speed: float
    n: int


@dataclass(frozen=True)
class TimeSeries:
    bucket: float
    points: list[SeriesPoint]
    standstills: list[tuple[float, float]]


def mean_speed_timeseries(
    tracks: TrackSet,
    fps: float = DEFAULT_FPS,
    bucket: float = DEFAULT_BUCKET,
    standstill_threshold: float = DEFAULT_STANDSTILL,
) -> TimeSeries:
    """Mean segment speed per time bucket; runs of slow buckets become standstills.

    Buckets are aligned to t = 0 and span the sampled time range. An empty
    bucket has no mean and interrupts a standstill run.
    """
    if not bucket > 0:
        raise ConfigError("bucket must be positive")
    s = pooled_speeds(tracks, fps)
    if len(s) == 0:
        return TimeSeries(bucket, [], [])
    t = s.mid_frame / fps
    k = np.floor(t / bucket).astype(np.int64)
    k0 = int(k.min())
    k -= k0
    nb = int(k.max()) + 1
    n = np.bincount(k, minlength=nb)
    sv = np.bincount(k, weights=s.speed, minlength=nb)
    points, slow = [], []
    for i in range(nb):
        mean = sv[i] / n[i] if n[i] else math.nan
        points.append(SeriesPoint((k0 + i + 0.5) * bucket, float(mean), int(n[i])))
        slow.append(bool(n[i]) and mean < standstill_threshold)
    standstills = []
    i = 0
    while i < nb:
        if slow[i]:
            j = i
            while j + 1 < nb and slow[j + 1]:
                j += 1
            standstills.append(((k0 + i) * bucket, (k0 + j + 1) * bucket))
            i = j + 1
        else:
            i += 1
    return TimeSeries(bucket, points, standstills)
