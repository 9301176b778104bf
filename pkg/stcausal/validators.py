"""
Centralise the validators for easy reuse between the data models and settings.
"""

from typing import List

import numpy as np


def check_latitude(latitude: float) -> float:
    """
    Make sure the latitude is given in degrees within [-90, 90].
    """
    if not -90.0 <= latitude <= 90.0:
        raise ValueError(f"The latitude {latitude} is outside of [-90, 90].")
    return latitude


def check_longitude(longitude: float) -> float:
    """
    Make sure the longitude is given in degrees within [-180, 180].
    """
    if not -180.0 <= longitude <= 180.0:
        raise ValueError(f"The longitude {longitude} is outside of [-180, 180].")
    return longitude


def check_fraction(value: float) -> float:
    """
    Make sure a support fraction lies in (0, 1].
    """
    if not 0.0 < value <= 1.0:
        raise ValueError(f"The fraction {value} should lie in (0, 1].")
    return value


def check_probability(value: float) -> float:
    """
    Make sure a probability or score threshold lies in [0, 1].
    """
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"The value {value} should lie in [0, 1].")
    return value


def check_strictly_increasing(timestamps: np.ndarray) -> np.ndarray:
    """
    Make sure a timestamp array is one dimensional and strictly increasing.
    """
    timestamps = np.asarray(timestamps, dtype=np.int64)
    if timestamps.ndim != 1:
        raise ValueError("The timestamps should be a one dimensional array.")
    if timestamps.size > 1 and np.any(np.diff(timestamps) <= 0):
        raise ValueError("The timestamps should be strictly increasing.")
    return timestamps


def check_evolving(levels: List[int]) -> List[int]:
    """
    Make sure a level sequence never repeats the same level twice in a row.
    """
    for previous, current in zip(levels, levels[1:]):
        if previous == current:
            raise ValueError(
                f"The level sequence {levels} repeats level {current} consecutively."
            )
    return levels
