"""Readers and writers for every on-disk format.

Floats are written with ``repr`` (shortest round-trip form) so identical
inputs always give byte-identical files. JSON sidecars carry a
``format_version``; readers reject unknown major versions.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analytics import CohortStats, Comparison, EdgeEffectReport, FundamentalDiagram, TimeSeries
from .density import DensityField, FlowMeasurement, RadialProfile, Raster
from .errors import ConfigError, DataError, FormatVersionError
from .geometry import GridSpec, Homography, SiteGeometry, fit_homography, project_points
from .tracks import Cohort, Track

FORMAT_VERSION = "1.0"
TRACK_HEADER = ["track_id", "frame", "x", "y", "space"]
COHORT_HEADER = ["track_id", "sex", "age_class", "mobility", "group_size"]


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _clean(obj):
    # NaN/inf are not JSON; numpy scalars are not serializable
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc


def check_version(d: dict, path="") -> None:
    v = str(d.get("format_version", FORMAT_VERSION))
    if v.split(".")[0] != FORMAT_VERSION.split(".")[0]:
        raise FormatVersionError(f"{path}: unsupported format_version {v}")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(c if isinstance(c, str) else fmt(c) for c in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_rows(path, required: Sequence[str]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        return list(reader)


# calibration ------------------------------------------------------------


def read_pairs(path) -> list[tuple[float, float, float, float]]:
    d = read_json(path)
    check_version(d, path)
    try:
        return [(float(p["u"]), float(p["v"]), float(p["x"]), float(p["y"])) for p in d["pairs"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed calibration pairs ({exc})") from exc


def write_homography(path, h: Homography) -> None:
    write_json(path, {"format_version": FORMAT_VERSION, "h": list(h.m), "rms_error_m": h.rms_error})


def read_homography(path) -> Homography:
    """Load a homography JSON, or fit one when given a calibration-pairs file."""
    d = read_json(path)
    check_version(d, path)
    if "h" in d:
        return Homography(tuple(float(c) for c in d["h"]), float(d.get("rms_error_m", 0.0)))
    if "pairs" in d:
        return fit_homography(read_pairs(path))
    raise DataError(f"{path}: neither 'h' nor 'pairs' present")


# site -------------------------------------------------------------------


def read_site(path) -> SiteGeometry:
    d = read_json(path)
    check_version(d, path)
    return SiteGeometry.from_dict(d)


def write_site(path, geom: SiteGeometry) -> None:
    write_json(path, {"format_version": FORMAT_VERSION, **geom.to_dict()})


# tracks -----------------------------------------------------------------


def read_cohorts(path) -> dict[str, Cohort]:
    out = {}
    for row in _read_rows(path, COHORT_HEADER):
        try:
            out[row["track_id"]] = Cohort(
                row["sex"] or "unspecified",
                row["age_class"] or "unspecified",
                row["mobility"] or "walking",
                int(row["group_size"] or 1),
            )
        except ValueError as exc:
            raise DataError(f"{path}: bad group_size ({exc})") from exc
    return out


def write_cohorts(path, tracks: Sequence[Track]) -> None:
    write_csv(
        path,
        COHORT_HEADER,
        ([t.id, t.cohort.sex, t.cohort.age_class, t.cohort.mobility, t.cohort.group_size] for t in tracks),
    )


def read_tracks(path, homography: Homography | None = None, cohorts: dict[str, Cohort] | None = None) -> list[Track]:
    """Load a keyframe CSV; image-space rows are projected once through ``homography``.

    Tracks keep the order of first appearance; keyframes are sorted by frame.
    An optional ``tags`` column is carried through untouched.
    """
    rows = _read_rows(path, TRACK_HEADER)
    groups: dict[str, list] = {}
    tags: dict[str, str] = {}
    for i, row in enumerate(rows):
        try:
            frame = int(row["frame"])
            x, y = float(row["x"]), float(row["y"])
        except ValueError as exc:
            raise DataError(f"{path}: row {i + 2}: {exc}") from exc
        space = row["space"].strip()
        if space not in ("image", "world"):
            raise DataError(f"{path}: row {i + 2}: space must be image or world")
        groups.setdefault(row["track_id"], []).append((frame, x, y, space))
        if row.get("tags"):
            tags[row["track_id"]] = row["tags"]
    cohorts = cohorts or {}
    tracks = []
    for tid, keys in groups.items():
        keys.sort(key=lambda k: k[0])
        frames = [k[0] for k in keys]
        xy = np.array([(k[1], k[2]) for k in keys], dtype=float)
        img = np.array([k[3] == "image" for k in keys])
        if img.any():
            if homography is None:
                raise ConfigError(f"track {tid} is in image space but no calibration was given")
            xy[img] = project_points(homography, xy[img])
        tracks.append(Track(tid, frames, xy, cohorts.get(tid, Cohort()), tags.get(tid, "")))
    return tracks


def write_tracks(path, tracks: Sequence[Track], space: str = "world") -> None:
    lines = [",".join(TRACK_HEADER)]
    for t in tracks:
        tid = t.id
        lines.extend(f"{tid},{f},{x!r},{y!r},{space}" for f, x, y in zip(t.frames.tolist(), *t.xy.T.tolist()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# density ----------------------------------------------------------------


def write_density(csv_path, field: DensityField) -> None:
    """CSV matrix (first line = southernmost grid row) plus ``.json`` sidecar."""
    csv_path = Path(csv_path)
    csv_path.write_text(
        "\n".join(",".join(fmt(v) for v in row) for row in field.rho) + "\n", encoding="utf-8"
    )
    write_json(
        csv_path.with_suffix(".json"),
        {
            "format_version": FORMAT_VERSION,
            "grid": field.grid.to_dict(),
            "time_label": field.time_label,
            "units": "persons/m^2",
            "matrix": csv_path.name,
            "row_order": "south_to_north",
        },
    )


def read_density(json_path) -> DensityField:
    json_path = Path(json_path)
    d = read_json(json_path)
    check_version(d, json_path)
    grid = GridSpec.from_dict(d["grid"])
    rho = np.loadtxt(json_path.with_name(d["matrix"]), delimiter=",", ndmin=2)
    if rho.shape != grid.shape:
        raise DataError(f"{json_path}: matrix shape {rho.shape} does not match grid {grid.shape}")
    return DensityField(grid, d["time_label"], rho)


def read_density_dir(directory) -> list[DensityField]:
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise DataError(f"{directory}: no density sidecars found")
    return [read_density(p) for p in paths]


def write_raster(path, raster: Raster) -> None:
    Path(path).write_text(raster.to_ppm(), encoding="ascii")


def write_palette(path, raster: Raster) -> None:
    pal = raster.palette
    write_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "breakpoints": list(pal.breakpoints),
            "colors": [list(c) for c in pal.colors],
            "unpainted": list(pal.unpainted),
            "rule": "cell color = color of the highest breakpoint <= density; density 0 or below the first breakpoint is unpainted",
        },
    )


def write_radial_profile(path, prof: RadialProfile) -> None:
    write_csv(path, ["r_lo", "r_hi", "mean_density", "area", "count"], prof.rings)


def write_flows(path, flows: Sequence[FlowMeasurement]) -> None:
    write_csv(
        path,
        ["gate", "t0", "t1", "crossings", "q_line", "q_specific"],
        ([f.line, f.t0, f.t1, f.crossings, f.q_line, f.q_specific] for f in flows),
    )


# analytics --------------------------------------------------------------


def write_cohort_stats(path, stats: Sequence[CohortStats]) -> None:
    write_csv(path, ["cohort", "n", "mu", "sigma", "p15"], ([s.cohort, s.n, s.mu, s.sigma, s.p85_exceeded] for s in stats))


def write_fundamental_diagram(path, fd: FundamentalDiagram) -> None:
    write_csv(path, ["rho_lo", "rho_hi", "mean_rho", "mean_speed", "n", "sparse"], fd.bins)


def read_fundamental_diagram(path) -> list[dict]:
    return _read_rows(path, ["rho_lo", "rho_hi", "mean_rho", "mean_speed", "n", "sparse"])


def read_reference(path) -> list[tuple[float, float]]:
    try:
        return [(float(r["rho"]), float(r["v"])) for r in _read_rows(path, ["rho", "v"])]
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def write_comparison(path, rows: Sequence[Comparison]) -> None:
    write_csv(path, ["rho", "v_measured", "v_ref", "delta"], rows)


def edge_report_dict(rep: EdgeEffectReport) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "inner": list(rep.inner),
        "outer": list(rep.outer),
        "mean_speed_inner": rep.mean_speed_inner,
        "mean_speed_outer": rep.mean_speed_outer,
        "n_inner": rep.n_inner,
        "n_outer": rep.n_outer,
        "ratio": rep.ratio,
        "edge_effect_present": rep.edge_effect_present,
    }


def write_timeseries(series_path, standstill_path, ts: TimeSeries) -> None:
    write_csv(series_path, ["t_mid", "mean_speed", "n"], ts.points)
    write_csv(standstill_path, ["t_start", "t_end"], ts.standstills)
