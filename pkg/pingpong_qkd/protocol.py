"""
The ping-pong session

Bob prepares a squeezed, randomly displaced state in one of two bases, Alice
displaces it by her key symbol on both quadratures and sends it back, and Bob
undoes his displacement and measures the quadrature of his basis. A fraction
of the runs is disclosed to estimate the fidelity of the returned state,
which is how Bob detects Eve.

Every round is built symbolically first (``trace_round``) and sampled
afterwards, so the Monte Carlo numbers and the closed forms share one model.
"""

import logging
import math
from typing import Optional, Sequence, Union

import numpy as np

from .adversary import Eavesdropper
from .analysis import fidelity_closed_form, output_variances
from .capacity import shannon_bits
from .errors import EstimationError, ParameterDomainError
from .gaussian_core import (
    Displacement,
    LinearForm,
    Mode,
    SourceRegistry,
    displace,
    masking_variance,
    new_vacuum_mode,
    squeeze,
)
from .models import (
    AttackConfig,
    Basis,
    FidelityEstimate,
    NoAttack,
    ProtocolParams,
    RoundTrace,
    RunRecord,
    SessionResult,
)

logger = logging.getLogger(__name__)

# Disclosed runs needed in each basis before the fidelity is estimated.
MIN_DISCLOSED_PER_BASIS = 30


def derive_sigma(r: float) -> float:
    """
    Masking variance that makes both bases prepare identical covariances.

    Raises:
        ParameterDomainError: If r <= 0
    """
    if not r > 0:
        raise ParameterDomainError(f"Squeezing factor r must be positive, got {r}")
    return masking_variance(r)


def bob_prepare(basis: Basis, alpha_draw: Displacement, params: ProtocolParams, registry: SourceRegistry) -> Mode:
    """Squeeze a fresh vacuum and displace the squeezed quadrature by alpha."""
    vacuum = new_vacuum_mode(registry, "mode1")
    if basis == Basis.P:
        return displace(squeeze(vacuum, params.r), dx=alpha_draw)
    return displace(squeeze(vacuum, -params.r), dy=alpha_draw)


def alice_encode(m: Mode, x: Displacement) -> Mode:
    return displace(m, x, x)


def bob_restore(m6: Mode, basis: Basis, alpha_draw: Displacement) -> Mode:
    """Apply D(-alpha) on the axis Bob displaced."""
    if basis == Basis.P:
        return displace(m6, dx=-alpha_draw)
    return displace(m6, dy=-alpha_draw)


def bob_decode(m: Mode, basis: Basis, alpha_draw: Displacement) -> LinearForm:
    restored = bob_restore(m, basis, alpha_draw)
    return restored.x1 if basis == Basis.P else restored.x2


def output_mode(m7: Mode, basis: Basis, x: Displacement, r: float) -> Mode:
    """Remove Alice's displacement and undo Bob's squeezing."""
    shifted = displace(m7, -x, -x)
    return squeeze(shifted, -r) if basis == Basis.P else squeeze(shifted, r)


def trace_round(
    basis: Basis,
    params: ProtocolParams,
    attack: Optional[AttackConfig],
    registry: SourceRegistry,
) -> RoundTrace:
    """
    Build every mode of one round on ``registry``.

    Sources are registered in a fixed order (A, X, Bob's vacuum, then Eve's
    vacua), which fixes how a seed maps onto draws.
    """
    alpha = registry.register("A", params.sigma2)
    x = registry.register("X", params.sigma_prime2)
    eve = Eavesdropper(attack)

    mode3 = bob_prepare(basis, alpha, params, registry)
    mode4 = eve.forward(mode3, registry)
    mode5 = alice_encode(mode4, x)
    mode6 = eve.backward(mode5, registry)
    mode7 = bob_restore(mode6, basis, alpha)

    return RoundTrace(
        basis=basis,
        alpha=alpha,
        x=x,
        mode3=mode3,
        mode4=mode4,
        mode5=mode5,
        mode6=mode6,
        mode7=mode7,
        measured=mode7.x1 if basis == Basis.P else mode7.x2,
        output=output_mode(mode7, basis, x, params.r),
        tap=eve.tap(params.r),
    )


def basis_indistinguishable(params: ProtocolParams) -> bool:
    """True when the prepared state has the same covariance in both bases."""
    moments = []
    for basis in Basis:
        registry = SourceRegistry()
        alpha = registry.register("A", params.sigma2)
        m3 = bob_prepare(basis, alpha, params, registry)
        moments.append((
            registry.variance(m3.x1),
            registry.variance(m3.x2),
            registry.covariance(m3.x1, m3.x2),
        ))
    (a1, a2, a12), (b1, b2, b12) = moments
    return (
        math.isclose(a1, b1, rel_tol=1e-12)
        and math.isclose(a2, b2, rel_tol=1e-12)
        and math.isclose(a12, b12, abs_tol=1e-12)
    )


def fidelity_estimate(records: Sequence[RunRecord], params: ProtocolParams) -> FidelityEstimate:
    """
    Estimate the fidelity from disclosed runs.

    The measured output variance is the pooled sample variance of
    e^r (measurement - x) over both bases; in each basis the measured
    quadrature plays the part of the first output quadrature. The conjugate
    variance is never measured, so it is computed from the transmittances
    fitted by least squares of measurement on (x, alpha, 1): the slope on x
    is sqrt(eta2) and the slope on alpha is sqrt(eta1 eta2) - 1.

    Args:
        records: The disclosed runs
        params: Session parameters

    Raises:
        EstimationError: If either basis has fewer than 30 disclosed runs
    """
    perp = np.array([rec.basis == Basis.P_PERP for rec in records], dtype=bool)
    n_p_perp = int(perp.sum())
    n_p = len(records) - n_p_perp
    if min(n_p, n_p_perp) < MIN_DISCLOSED_PER_BASIS:
        raise EstimationError(
            "Not enough disclosed runs per basis to estimate the fidelity",
            required=MIN_DISCLOSED_PER_BASIS,
            available=min(n_p, n_p_perp),
        )

    alpha = np.array([rec.alpha for rec in records], dtype=float)
    x = np.array([rec.x for rec in records], dtype=float)
    measurement = np.array([rec.bob_measurement for rec in records], dtype=float)

    residual = math.exp(params.r) * (measurement - x)
    var_p = np.var(residual[~perp], ddof=1)
    var_perp = np.var(residual[perp], ddof=1)
    v1 = float(((n_p - 1) * var_p + (n_p_perp - 1) * var_perp) / (n_p + n_p_perp - 2))

    design = np.column_stack([x, alpha, np.ones_like(x)])
    (slope_x, slope_alpha, _), *_ = np.linalg.lstsq(design, measurement, rcond=None)
    sqrt_eta2 = float(np.clip(slope_x, 0.0, 1.0))
    sqrt_p = float(np.clip(slope_alpha + 1.0, 0.0, sqrt_eta2))
    eta2 = sqrt_eta2 ** 2
    eta1 = (sqrt_p / sqrt_eta2) ** 2 if sqrt_eta2 > 0 else 0.0

    _, v2 = output_variances(params.r, params.sigma2, params.sigma_prime2, eta1, eta2)
    fidelity = fidelity_closed_form(v1, v2)
    n_used = n_p + n_p_perp
    stderr = 2.0 * fidelity / (4.0 * v1 + 1.0) * v1 * math.sqrt(2.0 / max(n_used - 2, 1))

    logger.debug(
        f"Fidelity estimate F={fidelity:.6g} from {n_used} disclosed runs "
        f"(v1={v1:.6g}, v2={v2:.6g}, eta1~{eta1:.4f}, eta2~{eta2:.4f})"
    )
    return FidelityEstimate(
        fidelity=fidelity,
        v1=v1,
        v2=v2,
        eta1_fit=eta1,
        eta2_fit=eta2,
        n_p=n_p,
        n_p_perp=n_p_perp,
        stderr=stderr,
    )


def estimate_fidelity(records: Sequence[RunRecord], params: ProtocolParams) -> float:
    return fidelity_estimate(records, params).fidelity


def _empirical_snr(x: np.ndarray, measurement: np.ndarray) -> float:
    """OLS of measurement on x: slope^2 var(x) / residual variance."""
    if x.size < 3:
        raise EstimationError("Not enough undisclosed runs to estimate the SNR", required=3, available=int(x.size))
    design = np.column_stack([x, np.ones_like(x)])
    coefficients, *_ = np.linalg.lstsq(design, measurement, rcond=None)
    residual = measurement - design @ coefficients
    noise = float(residual @ residual) / (x.size - 2)
    signal = float(coefficients[0]) ** 2 * float(np.var(x, ddof=1))
    if noise == 0.0:
        return math.inf if signal > 0.0 else 0.0
    return signal / noise


def run_session(
    params: ProtocolParams,
    attack: Optional[AttackConfig] = None,
    seed: Union[int, None] = 0,
) -> SessionResult:
    """
    Run ``params.n_runs`` rounds and estimate SNR and fidelity.

    The seed is split into three independent streams: Bob's basis choices,
    the Gaussian noise of the rounds, and Alice's choice of disclosed runs.
    Runs of the same basis share one symbolic round and are sampled in a
    single vectorised draw.

    Raises:
        EstimationError: If too few runs are disclosed in either basis
    """
    attack = attack if attack is not None else NoAttack()
    n = params.n_runs
    logger.info(f"Starting session: n_runs={n}, r={params.r}, sigma_prime2={params.sigma_prime2}, attack={attack.variant}, seed={seed}")

    basis_seq, noise_seq, disclosure_seq = np.random.SeedSequence(seed).spawn(3)
    perp = np.random.default_rng(basis_seq).integers(0, 2, size=n).astype(bool)

    alpha = np.zeros(n)
    x = np.zeros(n)
    measurement = np.zeros(n)
    for basis, mask, stream in zip(Basis, (~perp, perp), noise_seq.spawn(2)):
        count = int(mask.sum())
        if count == 0:
            continue
        registry = SourceRegistry()
        trace = trace_round(basis, params, attack, registry)
        a, xs, meas = registry.sample_joint(
            [trace.alpha, trace.x, trace.measured], np.random.default_rng(stream), size=count
        )
        alpha[mask], x[mask], measurement[mask] = a, xs, meas

    n_disclosed = min(n, math.ceil(params.disclosure_fraction * n - 1e-9))
    disclosed = np.zeros(n, dtype=bool)
    disclosed[np.random.default_rng(disclosure_seq).choice(n, size=n_disclosed, replace=False)] = True

    records = [
        RunRecord(
            basis=Basis.P_PERP if is_perp else Basis.P,
            alpha=a,
            x=xs,
            bob_measurement=meas,
            disclosed=flag,
        )
        for is_perp, a, xs, meas, flag in zip(
            perp.tolist(), alpha.tolist(), x.tolist(), measurement.tolist(), disclosed.tolist()
        )
    ]

    try:
        estimate = fidelity_estimate([rec for rec in records if rec.disclosed], params)
    except EstimationError as e:
        logger.error(f"✗ Session aborted before detection: {e}")
        raise

    key_alice = x[~disclosed]
    key_bob = measurement[~disclosed]
    snr = _empirical_snr(key_alice, key_bob)

    logger.info(
        f"✓ Session complete: SNR={snr:.6g}, F={estimate.fidelity:.6g} +/- {estimate.stderr:.2g}, "
        f"key length {key_alice.size}"
    )
    return SessionResult(
        records=records,
        empirical_snr=snr,
        empirical_mutual_info_bits=shannon_bits(snr),
        empirical_fidelity=estimate.fidelity,
        fidelity_stderr=estimate.stderr,
        fidelity_estimate=estimate,
        measurement_variance=float(np.var(key_bob, ddof=1)) if key_bob.size > 1 else 0.0,
        key_alice=key_alice.tolist(),
        key_bob=key_bob.tolist(),
        n_disclosed=n_disclosed,
        key_fraction=key_alice.size / n,
        seed=seed,
    )
