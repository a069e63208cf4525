"""Small bit-twiddling helpers shared across modules."""

from __future__ import annotations

import numpy as np


def is_power_of_two(value: int) -> bool:
    return value > 0 and (value & (value - 1)) == 0


def exact_log2(value: int) -> int:
    """log2 of an exact power of two; ValueError otherwise."""
    if not is_power_of_two(value):
        raise ValueError(f"{value} is not a power of two")
    return value.bit_length() - 1


def parity_array(values: np.ndarray) -> np.ndarray:
    """Per-element popcount parity (0 or 1) of a nonnegative int64 array."""
    return (np.bitwise_count(values) & 1).astype(np.int64)


def sign_array(values: np.ndarray) -> np.ndarray:
    """Per-element (-1)**popcount(v) as int64."""
    return 1 - 2 * parity_array(values)
