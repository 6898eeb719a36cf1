"""Run the theorem suites plus the Ramsey, Hoeffding and circuit checks.

Writes the JSON report and prints one PASS/FAIL line per suite.  The full
set takes roughly ten minutes on one core.
"""

import argparse
import json
import sys
from pathlib import Path

from qrs.bench.config import ExperimentConfig
from qrs.bench.suites import ALL_SUITES, verify_theorems


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--suites", default=",".join(ALL_SUITES))
    ap.add_argument("--out", type=Path, default=Path("verify_report.json"))
    ap.add_argument("--time-budget", type=float, default=3600.0)
    args = ap.parse_args()
    cfg = ExperimentConfig(command="verify", seed=args.seed, time_budget=args.time_budget,
                           options={"suites": args.suites.split(",")})
    report = verify_theorems(cfg)
    args.out.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    for s in report["suites"]:
        print(f"{'PASS' if s['passed'] else 'FAIL'} {s['name']}")
    sys.exit(0 if report["passed"] else 1)


if __name__ == "__main__":
    main()
