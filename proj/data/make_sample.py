#!/usr/bin/env python3
"""Writes the bundled 100-day Q/D/R sample.

The series is synthetic. It is shaped like the early-2020 Hubei outbreak
(about 68k cumulative cases, 4.5k deaths, 63k recoveries by late April) but
is NOT real surveillance data. It comes from a saturating infection model
with a recovery rate that rises over time, plus mild multiplicative noise on
the daily increments. Output is deterministic for a given seed.
"""

import argparse
import csv
import datetime as dt
import math
import random


def simulate(days, seed):
    rng = random.Random(seed)
    capacity = 68_000.0
    q, d, r = 450.0, 17.0, 28.0
    rows = []
    for day in range(days):
        rows.append((q, d, r))
        cumulative = q + d + r
        # hospital capacity and treatment improve: recovery accelerates
        gamma = 0.015 + 0.085 / (1.0 + math.exp(-(day - 32.0) / 6.0))
        delta = 0.0056 * math.exp(-day / 60.0) + 0.0004
        beta = 0.30
        new_cases = beta * q * max(0.0, 1.0 - cumulative / capacity)
        new_rec = gamma * q
        new_dead = delta * q
        noise = lambda: math.exp(rng.gauss(0.0, 0.03))
        new_cases *= noise()
        new_rec *= noise()
        new_dead *= noise()
        q = max(q + new_cases - new_rec - new_dead, 0.0)
        d += new_dead
        r += new_rec
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="hubei_like_100d.csv")
    parser.add_argument("--days", type=int, default=100)
    parser.add_argument("--seed", type=int, default=2020)
    parser.add_argument("--start", default="2020-01-22")
    args = parser.parse_args()

    start = dt.date.fromisoformat(args.start)
    with open(args.out, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["date", "Q", "D", "R"])
        for day, (q, d, r) in enumerate(simulate(args.days, args.seed)):
            date = start + dt.timedelta(days=day)
            writer.writerow([date.isoformat(), round(q), round(d), round(r)])


if __name__ == "__main__":
    main()
