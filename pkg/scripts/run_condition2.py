"""Snapshot sweep M = 32..4096 at 10 dB (9-element ULA, sources at 30 and 50 degrees).

    python3 scripts/run_condition2.py [--trials N] [--workers W] [--out results/condition2.csv]
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
    ap.add_argument("--out", default=str(ROOT / "results" / "condition2.csv"))
    a = ap.parse_args()
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    code = cli.main(["sweep", "--config", str(ROOT / "configs" / "condition2.cfg"),
                     "--trials", a.trials, "--workers", a.workers, "--out", a.out])
    if code == 0:
        print(Path(a.out).read_text())
    sys.exit(code)
