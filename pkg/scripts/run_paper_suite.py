"""Run the full acceptance battery and write results/paper_suite.csv."""
import sys
from pathlib import Path

from overlap_action.cli import main

OUT = Path(__file__).resolve().parent.parent / "results" / "paper_suite.csv"

if __name__ == "__main__":
    OUT.parent.mkdir(exist_ok=True)
    sys.exit(main(["--paper-suite", "--out", str(OUT)]))
