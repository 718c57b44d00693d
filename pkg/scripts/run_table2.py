#!/usr/bin/env python3
"""Forced coarse-space-size comparison (2d): DtN shrunk to two vectors per
subdomain, then the grid coarse space grown to the automatic DtN size.

Equivalent to `helmdd table2-desk`; writes results/table2.csv.
"""

import pathlib
import sys

from helmdd.harness import cli_main

if __name__ == "__main__":
    pathlib.Path("results").mkdir(exist_ok=True)
    argv = ["table2-desk", "--out", "results/table2.csv", *sys.argv[1:]]
    sys.exit(cli_main(argv))
