"""Noiseless root locations for 8- and 9-element arrays (sources at 30 and 50 degrees).

Writes results/roots_L8.csv and results/roots_L9.csv and prints a summary of
each: root count per class and the real-axis pairs.
"""
from collections import Counter
from pathlib import Path

from rvroot import cli
from rvroot.array_model import UlaConfig
from rvroot.experiments import root_locus

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    out_dir = ROOT / "results"
    out_dir.mkdir(exist_ok=True)
    for n in (8, 9):
        code = cli.main(["roots", "--elements", str(n), "--angles", "30,50", "--out", str(out_dir / f"roots_L{n}.csv")])
        if code:
            raise SystemExit(code)
        loc = root_locus(UlaConfig(n), (30.0, 50.0))
        counts = dict(sorted(Counter(loc.labels).items()))
        pairs = ", ".join(f"({a:.4f}, {b:.4f})" for a, b in loc.real_axis_pairs) or "none"
        print(f"L = {n}: {counts}; real-axis pairs {pairs}")
