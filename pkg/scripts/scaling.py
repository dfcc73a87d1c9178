"""Filter step time against feature dimension on the CPU.

Prints median time per step, the fitted log-log slope and the factorization
count at every size. A slope near 2 means the step is pure matrix-vector and
outer-product work; a cubic factorization would push it toward 3.
"""

import argparse
import json
from pathlib import Path

from lml_contact.bench import run_benchmark


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sweep", default="19,60,190,600,1900")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--out", type=Path)
    args = parser.parse_args()

    report = run_benchmark([int(v) for v in args.sweep.split(",")], args.repeats)
    print(f"{'n_w':>6s} {'params':>8s} {'median us/step':>15s} {'factorizations':>15s}")
    for row in report["rows"]:
        print(f"{row['n_w']:6d} {6 * row['n_w']:8d} {row['median_ns'] / 1e3:15.1f} {row['factorizations']:15d}")
    print(f"log-log slope {report['slope']:.2f} (bound {report['max_slope']})")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(report, indent=2) + "\n")


if __name__ == "__main__":
    main()
