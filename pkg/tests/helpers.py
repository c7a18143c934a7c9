"""Small builders shared across test modules."""

import datetime as dt

import numpy as np

from camduty.data import OccupancySeries

# 2014-03-03 is a Monday, so day_of_week at the series start is 0.
MONDAY = dt.datetime(2014, 3, 3)


def flat_series(value, minutes=1440, street="flat", start=MONDAY, bays=40):
    return OccupancySeries(street, start, bays, np.full(minutes, float(value)))


def block_series(blocks, minutes=1440, low=0.1, high=0.95, street="block", start=MONDAY):
    """Low occupancy everywhere except half-open [a, b) windows held at ``high``."""
    values = np.full(minutes, float(low))
    for a, b in blocks:
        values[a:b] = high
    return OccupancySeries(street, start, 40, values)


def random_series(rng, minutes=1440, street="rand", start=MONDAY):
    return OccupancySeries(street, start, 40, rng.random(minutes))
