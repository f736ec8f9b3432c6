"""
Shannon capacity of the additive white Gaussian noise channel
"""

from typing import Union

import numpy as np

from .errors import ParameterDomainError

ArrayLike = Union[float, np.ndarray]


def shannon_bits(gamma: ArrayLike) -> ArrayLike:
    """
    Capacity in bits per use of an AWGN channel with signal-to-noise ratio gamma.

    Args:
        gamma: Signal-to-noise ratio, scalar or array

    Returns:
        0.5 * log2(1 + gamma), with the same shape as ``gamma``

    Raises:
        ParameterDomainError: If any gamma is negative or NaN
    """
    values = np.asarray(gamma, dtype=float)
    if np.any(np.isnan(values)) or np.any(values < 0):
        raise ParameterDomainError(f"Signal-to-noise ratio must be non-negative, got {gamma}")
    bits = 0.5 * np.log2(1.0 + values)
    return float(bits) if bits.ndim == 0 else bits
