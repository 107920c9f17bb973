#!/usr/bin/env python3
"""Write a synthetic folder-per-class dataset for probing experiments.

Usage: python scripts/make_toy_dataset.py OUT_DIR [--classes N] [--per-class N] [--size N]
"""

import argparse

from visualsplit.toydata import write_toy_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir")
    parser.add_argument("--classes", type=int, default=10)
    parser.add_argument("--per-class", type=int, default=6)
    parser.add_argument("--size", type=int, default=64)
    args = parser.parse_args()
    root = write_toy_dataset(args.out_dir, args.classes, args.per_class, args.size)
    print(f"wrote {args.classes} classes x {args.per_class} images ({args.size}px) under {root}")


if __name__ == "__main__":
    main()
