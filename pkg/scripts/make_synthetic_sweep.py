#!/usr/bin/env python3
"""Emit a deterministic full-factorial sweep CSV for report demos."""

import argparse
import sys

from landslide_watch.evaluation.sweeps import dump_sweep_csv
from landslide_watch.evaluation.synthetic import synthetic_runs


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--tag", default="v1",
                        help="seed tag; changes every metric deterministically")
    parser.add_argument("--output", "-o", default="-")
    args = parser.parse_args()

    text = dump_sweep_csv(synthetic_runs(args.tag))
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.output} ({text.count(chr(10)) - 1} runs)", file=sys.stderr)


if __name__ == "__main__":
    main()
