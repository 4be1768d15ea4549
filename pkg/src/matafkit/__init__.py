"""Pedestrian trajectory analytics for the Mataf."""
from .analytics import (
    CohortStats,
    EdgeEffectReport,
    FundamentalDiagram,
    TimeSeries,
    cohort_stats,
    compare_reference,
    edge_center_contrast,
    fit_normal,
    fundamental_diagram,
    mean_speed_timeseries,
    oscillation_metric,
)
from .density import (
    CountField,
    DensityField,
    FlowMeasurement,
    Palette,
    RadialProfile,
    Raster,
    average_density,
    count_accuracy,
    count_frame,
    density_field,
    flow_across_line,
    radial_profile,
    render_density_map,
)
from .geometry import (
    CellIndex,
    GridSpec,
    Homography,
    ImagePoint,
    SiteGeometry,
    WorldPoint,
    cell_of,
    distance_to_wall,
    fit_homography,
    invert,
    project_to_plane,
)
from .synth import GroundTruth, Scenario, generate, preset
from .tracks import (
    Cohort,
    Keyframe,
    SpeedSeries,
    Track,
    WalkTime,
    interpolate_position,
    path_length,
    segment_speeds,
    validate_track,
    walk_time,
)

__version__ = "0.1.0"

__all__ = [
    "CellIndex",
    "Cohort",
    "CohortStats",
    "CountField",
    "DensityField",
    "EdgeEffectReport",
    "FlowMeasurement",
    "FundamentalDiagram",
    "GridSpec",
    "GroundTruth",
    "Homography",
    "ImagePoint",
    "Keyframe",
    "Palette",
    "RadialProfile",
    "Raster",
    "Scenario",
    "SiteGeometry",
    "SpeedSeries",
    "TimeSeries",
    "Track",
    "WalkTime",
    "WorldPoint",
    "average_density",
    "cell_of",
    "cohort_stats",
    "compare_reference",
    "count_accuracy",
    "count_frame",
    "density_field",
    "distance_to_wall",
    "edge_center_contrast",
    "fit_homography",
    "fit_normal",
    "flow_across_line",
    "fundamental_diagram",
    "generate",
    "interpolate_position",
    "invert",
    "mean_speed_timeseries",
    "oscillation_metric",
    "path_length",
    "preset",
    "project_to_plane",
    "radial_profile",
    "render_density_map",
    "segment_speeds",
    "validate_track",
    "walk_time",
]
