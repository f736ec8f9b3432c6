"""
Beam-splitter and lossy-line eavesdropping

Eve taps a fraction 1 - eta1 of the forward beam and 1 - eta2 of the returning
beam, then measures the combined mode a9 - k * a8. This module holds both the
interceptor used inside simulated sessions and the closed-form expressions
for Eve's signal-to-noise ratio and information.

Noise terms follow the vacuum-unit convention: Eve's SNR is
4 (1 - eta2) Sigma'^2 / (mu + nu), where mu + nu is her noise variance
divided by the vacuum variance 1/4.
"""

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np

from .capacity import shannon_bits
from .errors import ParameterDomainError
from .gaussian_core import Mode, SourceRegistry, beam_splitter, new_vacuum_mode
from .models import AttackConfig, EveTap, NoAttack

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def _transmittance(name: str, value: ArrayLike) -> np.ndarray:
    values = np.asarray(value, dtype=float)
    if np.any(np.isnan(values)) or np.any(values < 0.0) or np.any(values > 1.0):
        raise ParameterDomainError(f"{name} must lie in [0, 1], got {value}")
    return values


def _squeezing(r: float) -> float:
    if not r > 0:
        raise ParameterDomainError(f"Squeezing factor r must be positive, got {r}")
    return math.exp(2.0 * r)


def _as_output(values: np.ndarray) -> ArrayLike:
    return float(values) if np.ndim(values) == 0 else values


def intercept_forward(m3: Mode, eta1: float, registry: SourceRegistry) -> Tuple[Mode, Mode]:
    """
    Tap the forward beam.

    Returns:
        (mode4, mode8): the mode that continues to Alice and Eve's copy
    """
    _transmittance("eta1", eta1)
    vacuum = new_vacuum_mode(registry, "vac1")
    return beam_splitter(m3, vacuum, eta1)


def intercept_backward(m5: Mode, eta2: float, registry: SourceRegistry) -> Tuple[Mode, Mode]:
    """
    Tap the returning beam.

    Returns:
        (mode6, mode9): the mode that reaches Bob and Eve's copy
    """
    _transmittance("eta2", eta2)
    vacuum = new_vacuum_mode(registry, "vac2")
    return beam_splitter(m5, vacuum, eta2)


def optimal_k(r: float, eta1: ArrayLike, eta2: ArrayLike) -> ArrayLike:
    """
    Combining weight that maximises Eve's SNR.

    k* = (e^{2r} - 1) sqrt(eta1 (1 - eta1) (1 - eta2)) / (e^{2r} (1 - eta1) + eta1)
    """
    e = _squeezing(r)
    t1 = _transmittance("eta1", eta1)
    t2 = _transmittance("eta2", eta2)
    k = (e - 1.0) * np.sqrt(t1 * (1.0 - t1) * (1.0 - t2)) / (e * (1.0 - t1) + t1)
    return _as_output(k)


def eve_noise_units(r: float, eta1: ArrayLike, eta2: ArrayLike, k: Optional[ArrayLike] = None) -> ArrayLike:
    """mu + nu: Eve's noise variance in vacuum units."""
    e = _squeezing(r)
    t1 = _transmittance("eta1", eta1)
    t2 = _transmittance("eta2", eta2)
    weight = np.asarray(optimal_k(r, t1, t2) if k is None else k, dtype=float)
    mu = (np.sqrt(t1 * (1.0 - t2)) - weight * np.sqrt(1.0 - t1)) ** 2 * e
    nu = (np.sqrt((1.0 - t1) * (1.0 - t2)) + weight * np.sqrt(t1)) ** 2 + t2
    return _as_output(mu + nu)


def eve_snr(
    r: float,
    sigma_prime2: float,
    eta1: ArrayLike,
    eta2: ArrayLike,
    k: Optional[ArrayLike] = None,
) -> ArrayLike:
    """
    Eve's signal-to-noise ratio on either quadrature of a9 - k * a8.

    Args:
        r: Squeezing factor
        sigma_prime2: Variance of Alice's key symbols
        eta1: Forward transmittance (scalar or array)
        eta2: Backward transmittance (scalar or array)
        k: Combining weight; None uses ``optimal_k``

    Returns:
        4 (1 - eta2) Sigma'^2 / (mu + nu)
    """
    if not sigma_prime2 > 0:
        raise ParameterDomainError(f"sigma_prime2 must be positive, got {sigma_prime2}")
    t2 = _transmittance("eta2", eta2)
    noise = np.asarray(eve_noise_units(r, eta1, eta2, k), dtype=float)
    return _as_output(4.0 * (1.0 - t2) * sigma_prime2 / noise)


def eve_max_info(r: float, sigma_prime2: float, eta1: ArrayLike, eta2: ArrayLike) -> ArrayLike:
    """Eve's information in bits at the optimal combining weight."""
    return shannon_bits(eve_snr(r, sigma_prime2, eta1, eta2))


class Eavesdropper:
    """
    Session interceptor built from an attack configuration.

    One instance serves one round trace: ``forward`` and ``backward`` insert
    the beam splitters into the Heisenberg pipeline and remember Eve's modes,
    ``tap`` hands them back with the combining weight.
    """

    def __init__(self, attack: Optional[AttackConfig] = None):
        self.attack = attack if attack is not None else NoAttack()
        self.eta1, self.eta2 = self.attack.transmittances()
        self._mode8: Optional[Mode] = None
        self._mode9: Optional[Mode] = None

    @property
    def active(self) -> bool:
        return not isinstance(self.attack, NoAttack)

    def forward(self, m3: Mode, registry: SourceRegistry) -> Mode:
        if not self.active:
            return m3
        m4, self._mode8 = intercept_forward(m3, self.eta1, registry)
        return m4

    def backward(self, m5: Mode, registry: SourceRegistry) -> Mode:
        if not self.active:
            return m5
        m6, self._mode9 = intercept_backward(m5, self.eta2, registry)
        return m6

    def weight(self, r: float) -> float:
        fixed = getattr(self.attack, "k", None)
        return float(fixed) if fixed is not None else optimal_k(r, self.eta1, self.eta2)

    def tap(self, r: float) -> Optional[EveTap]:
        if self._mode8 is None or self._mode9 is None:
            return None
        return EveTap(mode8=self._mode8, mode9=self._mode9, k=self.weight(r))

