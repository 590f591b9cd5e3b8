"""Frequency of descending chains against the a_n^n / n! bound.

Prints a table with the 99% one-sided Wilson interval of each frequency.
"""

import argparse
import itertools

from hypermatch import chain_bound
from hypermatch.experiments import chain_event_frequency, wilson_interval

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--seeds", type=int, default=10_000)
    a = p.parse_args()
    print(f"{'d':>2} {'n':>2} {'b':>4} {'hits':>6} {'lower':>9} {'upper':>9} {'bound':>10}")
    for d, n, b in itertools.product((1, 2), (1, 2, 3), (0.5, 1.0)):
        hits, total = chain_event_frequency(d, a.alpha, n, b, range(a.seeds))
        lo, hi = wilson_interval(hits, total)
        print(f"{d:>2} {n:>2} {b:>4} {hits:>6} {lo:>9.4g} {hi:>9.4g} "
              f"{chain_bound(n, b, d, a.alpha):>10.4g}")
