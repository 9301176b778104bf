"""
Useful functions for testing the package.
"""
import contextlib
import os
import shutil
import tempfile
from typing import List, Tuple

import numpy as np


@contextlib.contextmanager
def temp_directory():
    """
    Create and enter a temporary directory, used as a context manager.
    Taken from https://github.com/mdtraj/mdtraj/blob/master/mdtraj/utils/contextmanagers.py#L39
    """
    temp_dir = tempfile.mkdtemp()
    cwd = os.getcwd()
    os.chdir(temp_dir)
    try:
        yield temp_dir
    finally:
        os.chdir(cwd)
        shutil.rmtree(temp_dir)


def random_day_sequences(
    seed: int, max_days: int = 8, max_events: int = 12, alphabet: int = 4
) -> List[List[Tuple[int, int]]]:
    """
    Draw a random list of daily (level, offset) sequences small enough for the
    exhaustive pattern oracle.
    """
    rng = np.random.default_rng(seed)
    days = []
    for _ in range(int(rng.integers(1, max_days + 1))):
        n_events = int(rng.integers(0, max_events + 1))
        # offsets on a coarse 10 minute grid so that transition limits bite
        offsets = np.sort(rng.choice(np.arange(0, 1440, 10), n_events, replace=False))
        levels = rng.integers(1, alphabet + 1, n_events)
        days.append([(int(l), int(o)) for l, o in zip(levels, offsets)])
    return days


