"""Command-line front end.

Every command reads its inputs from a JSON config (``--config``) and/or flags,
writes artifacts into the output directory (``--out``, else ``$MATAFKIT_OUT``,
else ``./out``) and exits 0. Failures print one JSON error record on stderr and
exit 2 (configuration), 3 (data) or 4 (numeric).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import analytics, density, files, synth
from .errors import ConfigError, DataError, MatafError, NumericError, TooFewKeyframes
from .geometry import GridSpec, SiteGeometry, fit_homography
from .tracks import DEFAULT_FPS, DEFAULT_MAX_SPEED, Track, positions_at, validate_track

COMMANDS = ("calibrate", "project", "density", "speeds", "fdiag", "edge", "osc", "timeseries", "flow", "synth", "report")


@dataclass
class RunConfig:
    tracks: str | None = None
    cohorts: str | None = None
    calibration: str | None = None
    site: str | None = None
    reference: str | None = None
    scenario: str | None = None
    preset: str | None = None
    densities: str | None = None
    out: str | None = None
    fps: float = DEFAULT_FPS
    cell_size: float = 5.0
    bin_width: float = analytics.DEFAULT_BIN_WIDTH
    min_bin_n: int = analytics.DEFAULT_MIN_BIN_N
    ring_width: float = 5.0
    inner: tuple[float, float] = analytics.DEFAULT_INNER_RING
    outer: tuple[float, float] = analytics.DEFAULT_OUTER_RING
    palette: list | None = None  # [[breakpoint, [r, g, b]], ...]
    bucket: float = analytics.DEFAULT_BUCKET
    standstill_threshold: float = analytics.DEFAULT_STANDSTILL
    max_speed: float = DEFAULT_MAX_SPEED
    osc_window: int = 5
    snapshot_every: int | None = None  # frames between density snapshots; default 1 s
    window: tuple[float, float] | None = None  # flow window in seconds
    seed: int | None = None

    @classmethod
    def load(cls, path) -> "RunConfig":
        d = files.read_json(path)
        files.check_version(d, path)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"format_version"}
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        base = Path(path).parent
        for key in ("tracks", "cohorts", "calibration", "site", "reference", "scenario", "densities"):
            if d.get(key) is not None:
                d[key] = str(base / d[key])
        d.pop("format_version", None)
        for key in ("inner", "outer", "window"):
            if d.get(key) is not None:
                d[key] = tuple(float(v) for v in d[key])
        return cls(**d)

    def validate(self) -> None:
        for key in ("tracks", "cohorts", "calibration", "site", "reference", "scenario", "densities"):
            p = getattr(self, key)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{key}: {p} does not exist")
        if not self.fps > 0:
            raise ConfigError("fps must be positive")
        if not self.cell_size > 0:
            raise ConfigError("cell_size must be positive")
        if not self.bin_width > 0 or self.min_bin_n < 0:
            raise ConfigError("bin_width must be positive and min_bin_n >= 0")
        if not self.ring_width > 0 or not self.bucket > 0:
            raise ConfigError("ring_width and bucket must be positive")
        if self.snapshot_every is not None and self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be >= 1")
        if self.window is not None and not self.window[1] > self.window[0]:
            raise ConfigError("window needs t1 > t0")

    @property
    def out_dir(self) -> Path:
        return Path(self.out or os.environ.get("MATAFKIT_OUT") or "out")


# loading helpers ----------------------------------------------------------


def _site(cfg: RunConfig) -> SiteGeometry:
    return files.read_site(cfg.site) if cfg.site else SiteGeometry.default()


def _grid(cfg: RunConfig) -> GridSpec:
    return GridSpec.covering(_site(cfg).bounds, cfg.cell_size)


def _palette(cfg: RunConfig) -> density.Palette:
    if not cfg.palette:
        return density.Palette.default()
    return density.Palette(tuple(p[0] for p in cfg.palette), tuple(tuple(p[1]) for p in cfg.palette))


def _tracks(cfg: RunConfig) -> list[Track]:
    if not cfg.tracks:
        raise ConfigError("this command needs --tracks")
    h = files.read_homography(cfg.calibration) if cfg.calibration else None
    cohorts = files.read_cohorts(cfg.cohorts) if cfg.cohorts else None
    tracks = files.read_tracks(cfg.tracks, h, cohorts)
    for t in tracks:
        for v in validate_track(t, cfg.max_speed, cfg.fps):
            print(f"warning: track {t.id}: {v.kind} at keyframe {v.index}: {v.detail}", file=sys.stderr)
    return tracks


def _snapshot_frames(tracks, cfg: RunConfig) -> np.ndarray:
    if not tracks:
        return np.array([0])
    step = cfg.snapshot_every or max(1, int(round(cfg.fps)))
    lo = min(t.first_frame for t in tracks)
    hi = max(t.last_frame for t in tracks)
    return np.arange(lo, hi + 1, step)


def _snapshot_fields(tracks, cfg: RunConfig) -> list[density.DensityField]:
    grid = _grid(cfg)
    frames = _snapshot_frames(tracks, cfg)
    out = []
    if not tracks:
        return [density.density_field(density.count_frame(grid, [], int(frames[0])))]
    pos = positions_at(tracks, frames)
    for k, f in enumerate(frames):
        p = pos[k]
        p = p[~np.isnan(p[:, 0])]
        out.append(density.density_field(density.count_frame(grid, p, int(f))))
    return out


# commands -----------------------------------------------------------------


def cmd_calibrate(cfg: RunConfig) -> dict:
    if not cfg.calibration:
        raise ConfigError("calibrate needs --calibration (pairs file)")
    h = fit_homography(files.read_pairs(cfg.calibration))
    files.write_homography(cfg.out_dir / "homography.json", h)
    return {"homography": "homography.json", "rms_error_m": h.rms_error}


def cmd_project(cfg: RunConfig) -> dict:
    tracks = _tracks(cfg)
    files.write_tracks(cfg.out_dir / "tracks_world.csv", tracks)
    return {"tracks_world": "tracks_world.csv", "n_tracks": len(tracks)}


def cmd_density(cfg: RunConfig, tracks=None) -> dict:
    tracks = _tracks(cfg) if tracks is None else tracks
    site = _site(cfg)
    fields_ = _snapshot_fields(tracks, cfg)
    ddir = cfg.out_dir / "density"
    ddir.mkdir(parents=True, exist_ok=True)
    for f in fields_:
        files.write_density(ddir / f"density_{int(f.time_label):07d}.csv", f)
    mean = density.average_density(fields_, time_label="mean")
    files.write_density(cfg.out_dir / "density_mean.csv", mean)
    raster = density.render_density_map(mean, _palette(cfg))
    files.write_raster(cfg.out_dir / "density_map.ppm", raster)
    files.write_palette(cfg.out_dir / "density_map_palette.json", raster)
    prof = density.radial_profile(mean, site, cfg.ring_width)
    files.write_radial_profile(cfg.out_dir / "radial_profile.csv", prof)
    return {
        "snapshots": len(fields_),
        "max_mean_density": float(mean.rho.max()),
        "radial_profile": [[r.r_lo, r.mean_density] for r in prof.rings],
    }


def cmd_speeds(cfg: RunConfig, tracks=None) -> dict:
    tracks = _tracks(cfg) if tracks is None else tracks
    stats = analytics.cohort_stats(tracks, cfg.fps)
    files.write_cohort_stats(cfg.out_dir / "cohort_stats.csv", stats)
    return {s.cohort: {"n": s.n, "mu": s.mu, "sigma": s.sigma, "p15": s.p85_exceeded} for s in stats}


def cmd_fdiag(cfg: RunConfig, tracks=None) -> dict:
    tracks = _tracks(cfg) if tracks is None else tracks
    fields_ = files.read_density_dir(cfg.densities) if cfg.densities else _snapshot_fields(tracks, cfg)
    fd = analytics.fundamental_diagram(tracks, fields_, cfg.fps, cfg.bin_width, cfg.min_bin_n)
    files.write_fundamental_diagram(cfg.out_dir / "fundamental_diagram.csv", fd)
    summary = {"bins": len(fd.bins), "dense_bins": len(fd.dense_bins()), "dropped": fd.dropped}
    if cfg.reference:
        cmp = analytics.compare_reference(fd, files.read_reference(cfg.reference))
        files.write_comparison(cfg.out_dir / "reference_deltas.csv", cmp)
        summary["max_abs_delta"] = max((abs(c.delta) for c in cmp), default=0.0)
    return summary


def cmd_edge(cfg: RunConfig, tracks=None) -> dict:
    tracks = _tracks(cfg) if tracks is None else tracks
    rep = analytics.edge_center_contrast(tracks, _site(cfg), cfg.inner, cfg.outer, cfg.fps)
    d = files.edge_report_dict(rep)
    files.write_json(cfg.out_dir / "edge.json", d)
    return d


def cmd_osc(cfg: RunConfig, tracks=None) -> dict:
    tracks = _tracks(cfg) if tracks is None else tracks
    site = _site(cfg)
    rows = []
    for t in tracks:
        try:
            rows.append([t.id, analytics.oscillation_metric(t, site, cfg.osc_window)])
        except TooFewKeyframes:
            continue
    files.write_csv(cfg.out_dir / "oscillation.csv", ["track_id", "rms_m"], rows)
    vals = [r[1] for r in rows]
    return {"n_tracks": len(rows), "mean_rms_m": float(np.mean(vals)) if vals else None}


def cmd_timeseries(cfg: RunConfig, tracks=None) -> dict:
    tracks = _tracks(cfg) if tracks is None else tracks
    ts = analytics.mean_speed_timeseries(tracks, cfg.fps, cfg.bucket, cfg.standstill_threshold)
    files.write_timeseries(cfg.out_dir / "timeseries.csv", cfg.out_dir / "standstills.csv", ts)
    return {"buckets": len(ts.points), "standstills": [list(s) for s in ts.standstills]}


def cmd_flow(cfg: RunConfig, tracks=None) -> dict:
    tracks = _tracks(cfg) if tracks is None else tracks
    site = _site(cfg)
    if cfg.window is not None:
        window = cfg.window
    elif tracks:
        window = (
            min(t.first_frame for t in tracks) / cfg.fps,
            max(t.last_frame for t in tracks) / cfg.fps,
        )
    else:
        window = (0.0, 1.0)
    if not window[1] > window[0]:
        raise DataError("tracks span no time; give --window")
    flows = [density.flow_across_line(tracks, site, g, window, cfg.fps) for g in sorted(site.gates)]
    files.write_flows(cfg.out_dir / "flow.csv", flows)
    return {f.line: {"crossings": f.crossings, "q_line": f.q_line, "q_specific": f.q_specific} for f in flows}


def _scenario(cfg: RunConfig) -> synth.Scenario:
    if cfg.scenario:
        s = synth.Scenario.from_dict(files.read_json(cfg.scenario))
    elif cfg.preset:
        s = synth.preset(cfg.preset)
    else:
        raise ConfigError("synth needs --scenario or --preset")
    if cfg.seed is not None:
        s = replace(s, seed=cfg.seed)
    return s


def cmd_synth(cfg: RunConfig) -> dict:
    s = _scenario(cfg)
    gt = synth.generate(s)
    out = cfg.out_dir
    files.write_json(out / "scenario.json", s.to_dict())
    files.write_site(out / "site.json", s.site)
    files.write_tracks(out / "tracks.csv", gt.tracks)
    files.write_cohorts(out / "cohorts.csv", gt.tracks)
    files.write_csv(
        out / "free_speeds.csv",
        ["track_id", "cohort", "free_speed"],
        ([t.id, lab, v] for t, lab, v in zip(gt.tracks, gt.labels, gt.free_speeds.tolist())),
    )
    ddir = out / "truth_density"
    ddir.mkdir(parents=True, exist_ok=True)
    step = cfg.snapshot_every or 1
    for c in gt.count_fields[::step]:
        files.write_density(ddir / f"density_{c.frame:07d}.csv", density.density_field(c))
    return {"n_agents": s.n_agents, "n_frames": s.n_frames, "fps": s.fps, "seed": s.seed}


def cmd_report(cfg: RunConfig) -> dict:
    """Run every step the inputs allow and write ``report.json``."""
    summary: dict = {"format_version": files.FORMAT_VERSION}
    if cfg.calibration and "pairs" in files.read_json(cfg.calibration):
        summary["calibrate"] = cmd_calibrate(cfg)
    if not cfg.tracks and (cfg.scenario or cfg.preset):
        summary["synth"] = cmd_synth(cfg)
        out = cfg.out_dir
        cfg = replace(
            cfg,
            tracks=str(out / "tracks.csv"),
            cohorts=str(out / "cohorts.csv"),
            site=str(out / "site.json"),
            fps=summary["synth"]["fps"],
            calibration=None,
        )
    tracks = _tracks(cfg)
    if cfg.calibration:
        summary["project"] = cmd_project(cfg)
    summary["density"] = cmd_density(cfg, tracks)
    summary["speeds"] = cmd_speeds(cfg, tracks)
    summary["timeseries"] = cmd_timeseries(cfg, tracks)
    summary["osc"] = cmd_osc(cfg, tracks)
    summary["flow"] = cmd_flow(cfg, tracks) if _site(cfg).gates else {}
    for name, fn in (("fdiag", cmd_fdiag), ("edge", cmd_edge)):
        try:
            summary[name] = fn(cfg, tracks)
        except DataError as exc:
            # a missing ring or empty overlap skips the step, it does not fail the report
            summary[name] = {"skipped": type(exc).__name__, "message": str(exc)}
    files.write_json(cfg.out_dir / "report.json", summary)
    return summary


HANDLERS = {
    "calibrate": cmd_calibrate,
    "project": cmd_project,
    "density": cmd_density,
    "speeds": cmd_speeds,
    "fdiag": cmd_fdiag,
    "edge": cmd_edge,
    "osc": cmd_osc,
    "timeseries": cmd_timeseries,
    "flow": cmd_flow,
    "synth": cmd_synth,
    "report": cmd_report,
}


def _pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected LO,HI")
    return float(parts[0]), float(parts[1])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="matafkit",
        description="Pedestrian trajectory analytics for the Mataf: calibration, density, speeds, "
        "fundamental diagrams, edge effect, oscillation and synthetic ground truth.",
        epilog="Output directory: --out, else $MATAFKIT_OUT, else ./out. "
        "Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric failure.",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run config; flags override its values")
    io = p.add_argument_group("inputs")
    io.add_argument("--tracks", help="keyframe CSV: track_id,frame,x,y,space")
    io.add_argument("--cohorts", help="cohort CSV: track_id,sex,age_class,mobility,group_size")
    io.add_argument("--calibration", help="calibration pairs JSON or homography JSON")
    io.add_argument("--site", help="site JSON (wall, bounds, landmarks, gates)")
    io.add_argument("--reference", help="reference speed-density CSV: rho,v")
    io.add_argument("--scenario", help="synthetic scenario JSON")
    io.add_argument("--preset", help="synthetic preset: " + ", ".join(sorted(synth.PRESETS)))
    io.add_argument("--densities", help="directory of density CSV + JSON sidecars")
    io.add_argument("--out", help="output directory")
    par = p.add_argument_group("parameters")
    par.add_argument("--fps", type=float, help=f"frames per second (default {DEFAULT_FPS:g})")
    par.add_argument("--cell-size", type=float, help="grid cell size in m (default 5)")
    par.add_argument("--bin-width", type=float, help="density bin width in persons/m^2 (default 0.5)")
    par.add_argument("--min-bin-n", type=int, help="samples below which a bin is sparse (default 10)")
    par.add_argument("--ring-width", type=float, help="radial profile ring width in m (default 5)")
    par.add_argument("--inner", type=_pair, help="inner ring LO,HI in m from the wall (default 0,10)")
    par.add_argument("--outer", type=_pair, help="outer ring LO,HI in m from the wall (default 40,55)")
    par.add_argument("--bucket", type=float, help="time-series bucket in s (default 10)")
    par.add_argument("--standstill-threshold", type=float, help="standstill speed in m/s (default 0.05)")
    par.add_argument("--max-speed", type=float, help="validation speed limit in m/s (default 3)")
    par.add_argument("--osc-window", type=int, help="oscillation moving-average window in keyframes (default 5)")
    par.add_argument("--snapshot-every", type=int, help="frames between density snapshots (default 1 s)")
    par.add_argument("--window", type=_pair, help="flow window T0,T1 in s (default: track time span)")
    par.add_argument("--seed", type=int, help="override the scenario seed")
    return p


def make_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig) if getattr(args, f.name, None) is not None}
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def run(command: str, cfg: RunConfig) -> dict:
    cfg.validate()
    try:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {cfg.out_dir}: {exc}") from exc
    return HANDLERS[command](cfg)


def _error(exc: Exception, code: int) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run(args.command, make_config(args))
    except MatafError as exc:
        return _error(exc, exc.exit_code)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        return _error(exc, ConfigError.exit_code)
    except (ValueError, KeyError) as exc:
        return _error(exc, DataError.exit_code)
    except (FloatingPointError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
        return _error(exc, NumericError.exit_code)
    return 0


if __name__ == "__main__":
    sys.exit(main())
