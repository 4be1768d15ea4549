"""Edge effect in the rush-hour preset: mean speed and density by wall distance.

    python3 scripts/edge_experiment.py --ring-width 5
"""
import argparse

import numpy as np

from matafkit.analytics import edge_center_contrast, local_densities
from matafkit.geometry import distances_to_wall
from matafkit.synth import generate, preset
from matafkit.tracks import pooled_speeds

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--ring-width", type=float, default=5.0)
    args = ap.parse_args()
    s = preset("rush_hour")
    gt = generate(s)
    sm = pooled_speeds(gt.tracks, s.fps)
    rho, inside = local_densities(sm.pos, sm.mid_frame, gt.density_fields())
    d = distances_to_wall(s.site, sm.pos)
    print(" ring (m)      n   mean rho   mean v")
    for lo in np.arange(0.0, 60.0, args.ring_width):
        m = inside & (d >= lo) & (d < lo + args.ring_width)
        if m.any():
            print(f"{lo:4.0f}-{lo + args.ring_width:<4.0f} {m.sum():7d}   {rho[m].mean():6.2f}   {sm.speed[m].mean():6.3f}")
    rep = edge_center_contrast(gt.tracks, s.site, fps=s.fps)
    print(f"inner {rep.mean_speed_inner:.3f} m/s, outer {rep.mean_speed_outer:.3f} m/s, ratio {rep.ratio:.2f}, "
          f"edge effect {'present' if rep.edge_effect_present else 'absent'}")
