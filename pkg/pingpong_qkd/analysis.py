"""
Closed-form information rates, fidelity and security thresholds

All functions accept scalars or numpy arrays for the transmittances and
return the same shape, so whole (eta1, eta2) grids are evaluated in one call.
Information is always in bits.
"""

import logging
import math
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import bisect

from .adversary import eve_max_info, eve_snr
from .capacity import shannon_bits
from .errors import ParameterDomainError, SolverError
from .gaussian_core import masking_variance
from .models import AttackConfig, EnvelopePoint, RatePoint, ThresholdResult

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

__all__ = [
    "attack_rates",
    "bob_variances",
    "capacity_no_eve",
    "delta_i",
    "delta_i_vs_fidelity",
    "fidelity_closed_form",
    "find_eta_threshold",
    "find_fidelity_threshold",
    "info_ab",
    "info_ae",
    "output_variances",
    "rate_point",
    "shannon_bits",
    "snr_ab",
    "sweep_fig2",
    "sweep_fig3",
    "sweep_grid",
    "thresholds",
]

MIN_ENVELOPE_GRID = 50
MIN_ENVELOPE_BINS = 20


def _squeezing(r: float) -> float:
    if not r > 0:
        raise ParameterDomainError(f"Squeezing factor r must be positive, got {r}")
    return math.exp(2.0 * r)


def _transmittances(eta1: ArrayLike, eta2: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    t1 = np.asarray(eta1, dtype=float)
    t2 = np.asarray(eta2, dtype=float)
    for name, values in (("eta1", t1), ("eta2", t2)):
        if np.any(np.isnan(values)) or np.any(values < 0.0) or np.any(values > 1.0):
            raise ParameterDomainError(f"{name} must lie in [0, 1], got {values}")
    return t1, t2


def _modulation(sigma_prime2: float) -> float:
    if not sigma_prime2 > 0:
        raise ParameterDomainError(f"sigma_prime2 must be positive, got {sigma_prime2}")
    return float(sigma_prime2)


def _as_output(values: np.ndarray) -> ArrayLike:
    return float(values) if np.ndim(values) == 0 else values


def _bob_noise(e: float, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    p = t1 * t2
    return 0.25 * p / e + 0.25 * (1.0 - np.sqrt(p)) ** 2 * (e - 1.0 / e) + 0.25 * (1.0 - p)


def bob_variances(r: float, sigma_prime2: float, eta1: ArrayLike, eta2: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """
    Variances of Bob's restored quadratures in basis P.

    Returns:
        (var X1, var X2): the measured quadrature and its conjugate
    """
    e = _squeezing(r)
    s2 = _modulation(sigma_prime2)
    t1, t2 = _transmittances(eta1, eta2)
    p = t1 * t2
    measured = t2 * s2 + _bob_noise(e, t1, t2)
    conjugate = 0.25 * p * e + t2 * s2 + 0.25 * (1.0 - p)
    return _as_output(measured), _as_output(conjugate)


def snr_ab(r: float, sigma_prime2: float, eta1: ArrayLike, eta2: ArrayLike) -> ArrayLike:
    """Bob's signal-to-noise ratio M / N with M = eta2 Sigma'^2."""
    e = _squeezing(r)
    s2 = _modulation(sigma_prime2)
    t1, t2 = _transmittances(eta1, eta2)
    return _as_output(t2 * s2 / _bob_noise(e, t1, t2))


def info_ab(r: float, sigma_prime2: float, eta1: ArrayLike, eta2: ArrayLike) -> ArrayLike:
    return shannon_bits(snr_ab(r, sigma_prime2, eta1, eta2))


def info_ae(
    r: float,
    sigma_prime2: float,
    eta1: ArrayLike,
    eta2: ArrayLike,
    k: Optional[ArrayLike] = None,
) -> ArrayLike:
    """Eve's information; the maximum over k unless a fixed k is given."""
    if k is None:
        return eve_max_info(r, sigma_prime2, eta1, eta2)
    return shannon_bits(eve_snr(r, sigma_prime2, eta1, eta2, k))


def delta_i(
    r: float,
    sigma_prime2: float,
    eta1: ArrayLike,
    eta2: ArrayLike,
    k: Optional[ArrayLike] = None,
) -> ArrayLike:
    """Secret information rate i_ab - i_ae in bits."""
    gain = np.asarray(info_ab(r, sigma_prime2, eta1, eta2)) - np.asarray(info_ae(r, sigma_prime2, eta1, eta2, k))
    return _as_output(gain)


def capacity_no_eve(r: float, sigma_prime2: float) -> float:
    """Alice-Bob information on a lossless line: 0.5 log2(1 + 4 Sigma'^2 e^{2r})."""
    return shannon_bits(4.0 * _modulation(sigma_prime2) * _squeezing(r))


def output_variances(
    r: float,
    sigma2: float,
    sigma_prime2: float,
    eta1: ArrayLike,
    eta2: ArrayLike,
) -> Tuple[ArrayLike, ArrayLike]:
    """
    Variances of the returned state mapped back onto the vacuum reference.

    Args:
        r: Squeezing factor
        sigma2: Bob's masking variance
        sigma_prime2: Variance of Alice's key symbols
        eta1: Forward transmittance
        eta2: Backward transmittance

    Returns:
        (v1, v2): measured-axis and conjugate-axis variances; both are
        exactly 1/4 on a lossless line
    """
    e = _squeezing(r)
    s2 = _modulation(sigma_prime2)
    t1, t2 = _transmittances(eta1, eta2)
    if not math.isclose(sigma2, masking_variance(r), rel_tol=1e-9):
        logger.warning(
            f"sigma2={sigma2:.6g} is off the indistinguishability condition for r={r} "
            f"(expected {masking_variance(r):.6g})"
        )
    p = t1 * t2
    modulation_residue = (np.sqrt(t2) - 1.0) ** 2 * s2
    v1 = 0.25 * p + e * ((1.0 - np.sqrt(p)) ** 2 * sigma2 + modulation_residue + 0.25 * (1.0 - p))
    v2 = 0.25 * p + (modulation_residue + 0.25 * (1.0 - p)) / e
    return _as_output(v1), _as_output(v2)


def fidelity_closed_form(v1: ArrayLike, v2: ArrayLike) -> ArrayLike:
    """
    Fidelity 2 / sqrt((4 v1 + 1)(4 v2 + 1)).

    Sub-vacuum variances give F > 1; the value is returned unclamped and a
    warning is logged.

    Raises:
        ParameterDomainError: If either variance is negative
    """
    a = np.asarray(v1, dtype=float)
    b = np.asarray(v2, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise ParameterDomainError(f"Output variances must be non-negative, got ({v1}, {v2})")
    fidelity = 2.0 / np.sqrt((4.0 * a + 1.0) * (4.0 * b + 1.0))
    if np.any(fidelity > 1.0 + 1e-12):
        logger.warning(f"Fidelity above 1 (max {np.max(fidelity):.6g}): output variances below vacuum are unphysical")
    return _as_output(fidelity)


def fidelity_at(r: float, sigma_prime2: float, eta1: ArrayLike, eta2: ArrayLike) -> ArrayLike:
    """Fidelity of an attack with the masking variance on its condition."""
    v1, v2 = output_variances(r, masking_variance(r), sigma_prime2, eta1, eta2)
    return fidelity_closed_form(v1, v2)


def rate_point(
    r: float,
    sigma_prime2: float,
    eta1: float,
    eta2: float,
    k: Optional[float] = None,
) -> RatePoint:
    i_ab = info_ab(r, sigma_prime2, eta1, eta2)
    i_ae = info_ae(r, sigma_prime2, eta1, eta2, k)
    return RatePoint(
        eta1=eta1,
        eta2=eta2,
        i_ab=i_ab,
        i_ae=i_ae,
        delta_i=i_ab - i_ae,
        fidelity=fidelity_at(r, sigma_prime2, eta1, eta2),
    )


def attack_rates(attack: AttackConfig, r: float, sigma_prime2: float) -> RatePoint:
    """
    Closed-form rates for any attack configuration.

    A lossy line of transmittance eta is evaluated as two beam splitters of
    transmittance eta with the optimal weight.
    """
    eta1, eta2 = attack.transmittances()
    point = rate_point(r, sigma_prime2, eta1, eta2, k=getattr(attack, "k", None))
    logger.debug(f"Rates under {attack.variant}: delta_i={point.delta_i:.6g} bits, F={point.fidelity:.6g}")
    return point


def find_eta_threshold(r: float, sigma_prime2: float, tol: float = 1e-4) -> float:
    """
    Lossy-line transmittance at which delta_i(eta, eta) changes sign.

    Raises:
        SolverError: If delta_i does not change sign on [0, 1]
    """
    if not tol > 0:
        raise ParameterDomainError(f"Tolerance must be positive, got {tol}")

    def gain(eta: float) -> float:
        return delta_i(r, sigma_prime2, eta, eta)

    lower, upper = gain(0.0), gain(1.0)
    if not (lower < 0.0 < upper):
        logger.error(f"✗ No sign change of delta_i on [0, 1] for r={r}, sigma_prime2={sigma_prime2}")
        raise SolverError("delta_i does not change sign on the lossy line", lower, upper)

    eta_star = bisect(gain, 0.0, 1.0, xtol=tol)
    logger.info(f"✓ Loss threshold eta*={eta_star:.6f} (r={r}, sigma_prime2={sigma_prime2}, tol={tol:g})")
    return eta_star


def _grid(grid_n: int) -> Tuple[np.ndarray, np.ndarray]:
    if grid_n < 2:
        raise ParameterDomainError(f"grid_n must be at least 2, got {grid_n}")
    axis = np.linspace(0.0, 1.0, grid_n)
    eta1, eta2 = np.meshgrid(axis, axis, indexing="ij")
    return eta1.ravel(), eta2.ravel()


def _grid_rates(r: float, sigma_prime2: float, grid_n: int) -> Tuple[np.ndarray, ...]:
    eta1, eta2 = _grid(grid_n)
    i_ab = np.asarray(info_ab(r, sigma_prime2, eta1, eta2))
    i_ae = np.asarray(info_ae(r, sigma_prime2, eta1, eta2))
    fidelity = np.asarray(fidelity_at(r, sigma_prime2, eta1, eta2))
    return eta1, eta2, i_ab, i_ae, i_ab - i_ae, fidelity


def sweep_grid(r: float, sigma_prime2: float, grid_n: int = 200) -> List[RatePoint]:
    """
    Rates on the full (eta1, eta2) grid over [0, 1]^2.

    Rows are ordered lexicographically by (eta1, eta2).
    """
    eta1, eta2, i_ab, i_ae, gain, fidelity = _grid_rates(r, sigma_prime2, grid_n)
    logger.info(f"✓ Evaluated {eta1.size} grid points (r={r}, sigma_prime2={sigma_prime2}, grid_n={grid_n})")
    return [
        RatePoint(eta1=a, eta2=b, i_ab=i, i_ae=j, delta_i=d, fidelity=f)
        for a, b, i, j, d, f in zip(
            eta1.tolist(), eta2.tolist(), i_ab.tolist(), i_ae.tolist(), gain.tolist(), fidelity.tolist()
        )
    ]


def sweep_fig2(r: float, sigma_prime2: float, grid_n: int = 200) -> List[RatePoint]:
    """delta_i surface over (eta1, eta2)."""
    return sweep_grid(r, sigma_prime2, grid_n)


def sweep_fig3(r: float, sigma_prime2: float, grid_n: int = 200) -> List[RatePoint]:
    """Fidelity surface over (eta1, eta2)."""
    return sweep_grid(r, sigma_prime2, grid_n)


def _check_envelope_resolution(grid_n: int, bins: int) -> None:
    if grid_n < MIN_ENVELOPE_GRID:
        raise ParameterDomainError(f"grid_n must be at least {MIN_ENVELOPE_GRID}, got {grid_n}")
    if bins < MIN_ENVELOPE_BINS:
        raise ParameterDomainError(f"bins must be at least {MIN_ENVELOPE_BINS}, got {bins}")


def delta_i_vs_fidelity(
    r: float,
    sigma_prime2: float,
    grid_n: int = 200,
    bins: int = 50,
    monotone: bool = True,
) -> List[EnvelopePoint]:
    """
    Lower envelope of delta_i against fidelity.

    The grid's fidelities are split into ``bins`` equal bins over
    [F_min, 1]; each non-empty bin reports the smallest delta_i in it. With
    ``monotone`` (default) the minima are carried down from the highest bin,
    so a bin reports the worst delta_i over every attack whose fidelity is at
    least the bin's lower edge. The raw per-bin minima (``monotone=False``)
    are not monotone: at r = 3, Sigma'^2 = 100 the bin near F = 0.43 sits
    below the one near F = 0.37.
    """
    _check_envelope_resolution(grid_n, bins)
    _, _, _, _, gain, fidelity = _grid_rates(r, sigma_prime2, grid_n)

    f_min = float(fidelity.min())
    f_max = max(1.0, float(fidelity.max()))
    width = (f_max - f_min) / bins
    index = np.minimum(((fidelity - f_min) / width).astype(int), bins - 1)

    counts = np.bincount(index, minlength=bins)
    minima = np.full(bins, np.inf)
    np.minimum.at(minima, index, gain)
    if monotone:
        minima = np.minimum.accumulate(minima[::-1])[::-1]

    envelope = [
        EnvelopePoint(
            fidelity_bin=f_min + (b + 0.5) * width,
            lower=f_min + b * width,
            upper=f_min + (b + 1) * width,
            delta_i_min=float(minima[b]),
            count=int(counts[b]),
        )
        for b in range(bins)
        if counts[b] > 0
    ]
    logger.info(f"✓ Envelope over {len(envelope)} fidelity bins (F_min={f_min:.6g}, bin width={width:.6g})")
    return envelope


def find_fidelity_threshold(r: float, sigma_prime2: float, grid_n: int = 200, bins: int = 50) -> float:
    """
    Critical fidelity: the largest fidelity any insecure grid attack reaches.

    Above it every attack on the grid leaves delta_i > 0, which is where the
    lower envelope crosses zero.

    Raises:
        SolverError: If no grid point has delta_i < 0
    """
    _check_envelope_resolution(grid_n, bins)
    _, _, _, _, gain, fidelity = _grid_rates(r, sigma_prime2, grid_n)
    insecure = gain < 0.0
    if not np.any(insecure):
        logger.error(f"✗ No insecure attack on the grid for r={r}, sigma_prime2={sigma_prime2}")
        raise SolverError("delta_i is non-negative on the whole grid; no critical fidelity", float(gain.min()), float(gain.max()))
    f_critical = float(fidelity[insecure].max())
    logger.info(f"✓ Critical fidelity F_c={f_critical:.6g} (grid_n={grid_n})")
    return f_critical


def thresholds(
    r: float,
    sigma_prime2: float,
    tol: float = 1e-4,
    grid_n: int = 200,
    bins: int = 50,
) -> ThresholdResult:
    eta_star = find_eta_threshold(r, sigma_prime2, tol)
    f_critical = find_fidelity_threshold(r, sigma_prime2, grid_n, bins)
    fidelity = np.asarray(fidelity_at(r, sigma_prime2, *_grid(grid_n)))
    return ThresholdResult(
        eta_star=eta_star,
        f_critical=f_critical,
        grid_resolution=1.0 / (grid_n - 1),
        tolerance=tol,
        grid_n=grid_n,
        bins=bins,
        bin_width=(max(1.0, float(fidelity.max())) - float(fidelity.min())) / bins,
    )
