"""Generate every synthetic preset and run the full report pipeline on it.

    python3 scripts/run_presets.py --out runs
"""
import argparse
import json
import sys
import time
from pathlib import Path

from matafkit.cli import main
from matafkit.synth import PRESETS


def run(name: str, out: Path) -> dict:
    t0 = time.perf_counter()
    # rush_hour is large; thin its density snapshots to one per second
    code = main(["report", "--preset", name, "--out", str(out / name), "--snapshot-every", "5"])
    if code:
        sys.exit(code)
    summary = json.loads((out / name / "report.json").read_text())
    summary["elapsed_s"] = round(time.perf_counter() - t0, 2)
    return summary


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="runs")
    ap.add_argument("presets", nargs="*", default=sorted(PRESETS))
    args = ap.parse_args()
    for name in args.presets:
        s = run(name, Path(args.out))
        edge = s.get("edge", {})
        print(
            f"{name:10s} agents={s['synth']['n_agents']:6d} "
            f"inner={edge.get('mean_speed_inner', float('nan')):.3f} "
            f"outer={edge.get('mean_speed_outer', float('nan')):.3f} "
            f"standstills={s['timeseries']['standstills']} ({s['elapsed_s']} s)"
        )
