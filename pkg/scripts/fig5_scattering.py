"""Scattering intensity of the matched sample, 1D near-critical or 2D.

    python scripts/fig5_scattering.py 2d [--scale smoke] [--out DIR]
    python scripts/fig5_scattering.py 1d
"""

import argparse
import sys

from hypermatch.cli import main

if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("dim", choices=("1d", "2d"))
    args, rest = p.parse_known_args()
    sys.exit(main(["repro", f"fig5-{args.dim}", "--svg", *rest]))
