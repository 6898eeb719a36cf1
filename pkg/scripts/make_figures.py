"""Write the CSV data for every figure into one directory."""

import argparse
from pathlib import Path

from qrs.bench import curves
from qrs.bench.cli import FIGURES


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("figures"))
    args = ap.parse_args()
    for fig in FIGURES:
        path = curves.write_curves(curves.emit_figure(fig), args.out / f"fig{fig}.csv")
        print(path)


if __name__ == "__main__":
    main()
