#!/usr/bin/env python3
"""Build the self-contained demo feed and optionally drain it."""

import argparse

from landslide_watch.demo import EXPECTED_STATS, build_demo
from landslide_watch.pipeline import load_config, run_pipeline


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("target", help="directory to write the fixture into")
    parser.add_argument("--run", action="store_true", help="drain the feed after writing it")
    args = parser.parse_args()

    config = build_demo(args.target)
    print(f"wrote {config}")
    print(f"expected drain stats: {EXPECTED_STATS}")
    if args.run:
        stats = run_pipeline(load_config(config), mode="drain")
        print(stats.format())


if __name__ == "__main__":
    main()
