#!/usr/bin/env python3
"""Desk-scale sweep over the one-level / grid-CS / DtN-CS comparison (2d).

Equivalent to `helmdd table1-desk`; writes results/table1.csv and prints the
summary table.  Pass --full for the complete wavenumber range (slow).
"""

import pathlib
import sys

from helmdd.harness import cli_main

if __name__ == "__main__":
    pathlib.Path("results").mkdir(exist_ok=True)
    argv = ["table1-desk", "--out", "results/table1.csv", *sys.argv[1:]]
    sys.exit(cli_main(argv))
