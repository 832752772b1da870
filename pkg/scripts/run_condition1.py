"""SNR sweep 0..20 dB (M = 200, 9-element ULA, sources at 30 and 50 degrees).

    python3 scripts/run_condition1.py [--trials N] [--workers W] [--out results/condition1.csv]
"""
import argparse
import sys
from pathlib import Path

from rvroot import cli

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", default="1000")
    ap.add_argument("--workers", default="1")
    ap.add_argument("--out", default=str(ROOT / "results" / "condition1.csv"))
    a = ap.parse_args()
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    code = cli.main(["sweep", "--config", str(ROOT / "configs" / "condition1.cfg"),
                     "--trials", a.trials, "--workers", a.workers, "--out", a.out])
    if code == 0:
        print(Path(a.out).read_text())
    sys.exit(code)
