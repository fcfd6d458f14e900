import math

import numpy as np


def make_scan_id(split, index, kind=""):
    """Corpus scan id such as ``train_normal_000``."""
    parts = [split, kind] if kind else [split]
    return "_".join(parts + [f"{index:03d}"])


def round_half_up(value):
    """Round to the nearest integer, ties going up (2.5 -> 3, -2.5 -> -2)."""
    return int(math.floor(value + 0.5))


def make_rng(seed, *streams):
    """Seeded generator; extra integers select an independent sub-stream."""
    return np.random.default_rng([int(seed), *(int(s) for s in streams)])
