#!/usr/bin/env python3
"""3d smoke experiment at k=10 over the (alpha, alpha') load-balancing pairs.

Equivalent to `helmdd table3-desk`; writes results/table3.csv.  Pass
--with-dtn to include the DtN coarse space (dense interface eigenproblems,
several minutes per subdomain family).
"""

import pathlib
import sys

from helmdd.harness import cli_main

if __name__ == "__main__":
    pathlib.Path("results").mkdir(exist_ok=True)
    argv = ["table3-desk", "--out", "results/table3.csv", *sys.argv[1:]]
    sys.exit(cli_main(argv))
