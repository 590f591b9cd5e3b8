"""Number variance of the matched sample in 2D at alpha = 1.01.

    python scripts/fig7_number_variance.py [--scale smoke] [--out DIR]
"""

import sys

from hypermatch.cli import main

if __name__ == "__main__":
    sys.exit(main(["repro", "fig7", "--svg", *sys.argv[1:]]))
