"""Keyframed pedestrian trajectories.

A track is a sparse list of ``(frame, position)`` keys placed by hand on a
pedestrian. Between keys the position is linear in the frame index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, GateNotCrossed, OutOfRange, TooFewKeyframes
from .geometry import SiteGeometry, WorldPoint

DEFAULT_FPS = 25.0
DEFAULT_MAX_SPEED = 3.0

SEXES = ("male", "female", "unspecified")
AGE_CLASSES = ("young", "old", "unspecified")
MOBILITIES = ("walking", "wheelchair")


@dataclass(frozen=True)
class Cohort:
    sex: str = "unspecified"
    age_class: str = "unspecified"
    mobility: str = "walking"
    group_size: int = 1

    def __post_init__(self):
        if self.sex not in SEXES:
            raise ConfigError(f"bad sex {self.sex!r}")
        if self.age_class not in AGE_CLASSES:
            raise ConfigError(f"bad age_class {self.age_class!r}")
        if self.mobility not in MOBILITIES:
            raise ConfigError(f"bad mobility {self.mobility!r}")
        if int(self.group_size) < 1:
            raise ConfigError("group_size must be >= 1")

    @property
    def label(self) -> str:
        """Grouping used for speed statistics: wheelchair users apart, others by sex."""
        if self.mobility == "wheelchair":
            return "wheelchair"
        return self.sex


class Keyframe(NamedTuple):
    frame: int
    pos: WorldPoint


@dataclass(frozen=True, eq=False)
class Track:
    """One identified pedestrian: keyframe indices ``frames`` and positions ``xy`` (n, 2)."""

    id: str
    frames: np.ndarray
    xy: np.ndarray
    cohort: Cohort = field(default_factory=Cohort)
    tags: str = ""

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.int64).reshape(-1)
        xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        if len(frames) != len(xy):
            raise ConfigError("frames and positions differ in length")
        if len(frames) == 0:
            raise TooFewKeyframes(f"track {self.id} has no keyframes")
        frames.flags.writeable = False
        xy.flags.writeable = False
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "xy", xy)

    @classmethod
    def from_keyframes(cls, id: str, keys: Iterable, cohort: Cohort | None = None) -> "Track":
        keys = [Keyframe(int(f), WorldPoint(float(p[0]), float(p[1]))) for f, p in keys]
        return cls(id, [k.frame for k in keys], [k.pos for k in keys], cohort or Cohort())

    @property
    def keyframes(self) -> list[Keyframe]:
        return [Keyframe(int(f), WorldPoint(float(x), float(y))) for f, (x, y) in zip(self.frames, self.xy)]

    @property
    def first_frame(self) -> int:
        return int(self.frames[0])

    @property
    def last_frame(self) -> int:
        return int(self.frames[-1])

    def __len__(self) -> int:
        return len(self.frames)


TrackSet = Sequence[Track]


@dataclass(frozen=True)
class SpeedSeries:
    """Per-segment speeds attributed to segment midpoints (frame and position)."""

    mid_frame: np.ndarray
    pos: np.ndarray
    speed: np.ndarray

    def __len__(self) -> int:
        return len(self.speed)


@dataclass(frozen=True)
class WalkTime:
    track_id: str
    gate_a: str
    gate_b: str
    t_p: float
    distance: float
    speed: float


@dataclass(frozen=True)
class Violation:
    kind: str  # "frame_order" | "non_finite" | "speed"
    index: int
    detail: str


def interpolate_position(t: Track, frame: float) -> WorldPoint:
    if not (t.frames[0] <= frame <= t.frames[-1]):
        raise OutOfRange(f"frame {frame} outside [{t.first_frame}, {t.last_frame}] of track {t.id}")
    k = int(np.searchsorted(t.frames, frame, side="right")) - 1
    if k >= len(t.frames) - 1 or t.frames[k] == frame:
        return WorldPoint(*map(float, t.xy[k]))
    f0, f1 = t.frames[k], t.frames[k + 1]
    w = (frame - f0) / (f1 - f0)
    p = t.xy[k] + w * (t.xy[k + 1] - t.xy[k])
    return WorldPoint(float(p[0]), float(p[1]))


def positions_at(tracks: TrackSet, frames) -> np.ndarray:
    """Interpolated positions of every track at every requested frame.

    Returns an array of shape (len(frames), len(tracks), 2); NaN where a track
    is not alive at that frame.
    """
    frames = np.asarray(frames, dtype=float).reshape(-1)
    out = np.full((len(frames), len(tracks), 2), np.nan)
    for j, t in enumerate(tracks):
        alive = (frames >= t.frames[0]) & (frames <= t.frames[-1])
        if not alive.any():
            continue
        f = frames[alive]
        out[alive, j, 0] = np.interp(f, t.frames, t.xy[:, 0])
        out[alive, j, 1] = np.interp(f, t.frames, t.xy[:, 1])
    return out


def segment_speeds(t: Track, fps: float = DEFAULT_FPS) -> SpeedSeries:
    if not fps > 0:
        raise ConfigError("fps must be positive")
    if len(t) < 2:
        raise TooFewKeyframes(f"track {t.id} needs at least 2 keyframes")
    d = np.hypot(*np.diff(t.xy, axis=0).T)
    dt = np.diff(t.frames) / fps
    return SpeedSeries(
        mid_frame=(t.frames[:-1] + t.frames[1:]) / 2.0,
        pos=(t.xy[:-1] + t.xy[1:]) / 2.0,
        speed=d / dt,
    )


@dataclass(frozen=True)
class SpeedSamples:
    """Segment speed samples pooled over a track set; ``track`` indexes the source track."""

    mid_frame: np.ndarray
    pos: np.ndarray
    speed: np.ndarray
    track: np.ndarray

    def __len__(self) -> int:
        return len(self.speed)


def pooled_speeds(tracks: TrackSet, fps: float = DEFAULT_FPS) -> SpeedSamples:
    """Concatenate :func:`segment_speeds` over all tracks, skipping single-key tracks."""
    parts = [(j, segment_speeds(t, fps)) for j, t in enumerate(tracks) if len(t) >= 2]
    if not parts:
        return SpeedSamples(np.empty(0), np.empty((0, 2)), np.empty(0), np.empty(0, dtype=np.int64))
    return SpeedSamples(
        mid_frame=np.concatenate([s.mid_frame for _, s in parts]),
        pos=np.concatenate([s.pos for _, s in parts]),
        speed=np.concatenate([s.speed for _, s in parts]),
        track=np.concatenate([np.full(len(s), j, dtype=np.int64) for j, s in parts]),
    )


def path_length(t: Track) -> float:
    if len(t) < 2:
        return 0.0
    return math.fsum(np.hypot(*np.diff(t.xy, axis=0).T))


def mean_track_speed(t: Track, fps: float = DEFAULT_FPS) -> float:
    """Average walking speed over the whole track: path length over elapsed time."""
    if len(t) < 2:
        raise TooFewKeyframes(f"track {t.id} needs at least 2 keyframes")
    return path_length(t) / ((t.last_frame - t.first_frame) / fps)


def gate_crossings(frames, xy, a, b) -> tuple[np.ndarray, np.ndarray]:
    """Crossings of the polyline ``xy`` (keyed at ``frames``) through segment ``a``-``b``.

    A point exactly on the gate line counts as lying on its non-negative side,
    so a path that passes through the line is counted once and a path that
    only touches it from the non-negative side is not counted. Returns the
    interpolated crossing frames and crossing points, in path order.
    """
    frames = np.asarray(frames, dtype=float)
    xy = np.asarray(xy, dtype=float)
    if len(frames) < 2:
        return np.empty(0), np.empty((0, 2))
    a = np.asarray(a, dtype=float)
    g = np.asarray(b, dtype=float) - a
    side = g[0] * (xy[:, 1] - a[1]) - g[1] * (xy[:, 0] - a[0])
    s0, s1 = side[:-1], side[1:]
    sign_change = ((s0 < 0) & (s1 >= 0)) | ((s1 < 0) & (s0 >= 0))
    idx = np.nonzero(sign_change)[0]
    if len(idx) == 0:
        return np.empty(0), np.empty((0, 2))
    w = s0[idx] / (s0[idx] - s1[idx])
    pts = xy[idx] + w[:, None] * (xy[idx + 1] - xy[idx])
    along = ((pts - a) @ g) / (g @ g)
    on_gate = (along >= 0.0) & (along <= 1.0)
    f = frames[idx] + w * (frames[idx + 1] - frames[idx])
    return f[on_gate], pts[on_gate]


def walk_time(t: Track, geom: SiteGeometry, gate_a: str, gate_b: str, fps: float = DEFAULT_FPS) -> WalkTime:
    """Time ``t_p`` between the first crossing of ``gate_a`` and the next crossing of ``gate_b``."""
    fa, pa = gate_crossings(t.frames, t.xy, *geom.gate(gate_a))
    if len(fa) == 0:
        raise GateNotCrossed(f"track {t.id} never crosses {gate_a}")
    fb, pb = gate_crossings(t.frames, t.xy, *geom.gate(gate_b))
    later = np.nonzero(fb > fa[0])[0]
    if len(later) == 0:
        raise GateNotCrossed(f"track {t.id} does not cross {gate_b} after {gate_a}")
    k = later[0]
    t_p = (fb[k] - fa[0]) / fps
    dist = float(np.hypot(*(pb[k] - pa[0])))
    return WalkTime(t.id, gate_a, gate_b, float(t_p), dist, dist / float(t_p))


def validate_track(t: Track, max_speed: float = DEFAULT_MAX_SPEED, fps: float = DEFAULT_FPS) -> list[Violation]:
    out = []
    df = np.diff(t.frames)
    for i in np.nonzero(df <= 0)[0]:
        out.append(Violation("frame_order", int(i + 1), f"frame {t.frames[i + 1]} after {t.frames[i]}"))
    for i in np.nonzero(~np.all(np.isfinite(t.xy), axis=1))[0]:
        out.append(Violation("non_finite", int(i), "position is not finite"))
    if len(t) >= 2:
        d = np.hypot(*np.diff(t.xy, axis=0).T)
        for i in range(len(df)):
            if df[i] <= 0 or not math.isfinite(d[i]):
                continue
            v = d[i] / (df[i] / fps)
            if v > max_speed:
                out.append(Violation("speed", int(i), f"{v:.3f} m/s exceeds {max_speed} m/s"))
    return out


def downsample(t: Track, every: int) -> Track:
    """Keep every ``every``-th keyframe plus the last one (lossy keyframe export)."""
    if every < 1:
        raise ConfigError("every must be >= 1")
    keep = np.arange(0, len(t), every)
    if keep[-1] != len(t) - 1:
        keep = np.append(keep, len(t) - 1)
    return Track(t.id, t.frames[keep], t.xy[keep], t.cohort, t.tags)
