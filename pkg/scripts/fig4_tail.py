"""Matching-distance tail in 3D: writes eccdf.csv, eccdf.svg and summary.json.

    python scripts/fig4_tail.py [--scale smoke] [--out DIR]
"""

import sys

from hypermatch.cli import main

if __name__ == "__main__":
    sys.exit(main(["repro", "fig4-3d", "--svg", *sys.argv[1:]]))
