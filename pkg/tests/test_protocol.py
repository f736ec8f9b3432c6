"""Tests for the ping-pong session."""

import logging
import math

import numpy as np
import pytest
from pydantic import ValidationError

from pingpong_qkd.analysis import bob_variances, capacity_no_eve, fidelity_at, snr_ab
from pingpong_qkd.errors import EstimationError, ParameterDomainError
from pingpong_qkd.gaussian_core import displace, masking_variance, variance
from pingpong_qkd.models import (
    Basis,
    BeamSplitterAttack,
    LossyLineAttack,
    NoAttack,
    ProtocolParams,
    RunRecord,
)
from pingpong_qkd.protocol import (
    MIN_DISCLOSED_PER_BASIS,
    alice_encode,
    basis_indistinguishable,
    bob_decode,
    bob_prepare,
    derive_sigma,
    estimate_fidelity,
    fidelity_estimate,
    run_session,
)

R = 3.0
SIGMA_PRIME2 = 100.0


class TestDeriveSigma:
    def test_default_operating_point(self):
        assert derive_sigma(3.0) == pytest.approx(100.8566, rel=1e-6)

    def test_vanishes_without_squeezing(self):
        assert derive_sigma(1e-9) == pytest.approx(0.0, abs=1e-8)

    @pytest.mark.parametrize("r", [0.0, -1.0])
    def test_rejects_non_positive_squeezing(self, r):
        with pytest.raises(ParameterDomainError):
            derive_sigma(r)


class TestProtocolParams:
    def test_sigma2_derived_when_omitted(self, params):
        assert params.sigma2 == masking_variance(R)
        assert params.n_runs == 100_000
        assert params.disclosure_fraction == 0.1

    def test_off_condition_sigma2_kept_with_warning(self, caplog):
        with caplog.at_level(logging.WARNING):
            params = ProtocolParams(r=R, sigma_prime2=SIGMA_PRIME2, sigma2=50.0)

        assert params.sigma2 == 50.0
        assert "indistinguishability" in caplog.text

    @pytest.mark.parametrize(
        "fields",
        [
            {"r": 0.0},
            {"sigma_prime2": 0.0},
            {"n_runs": 0},
            {"disclosure_fraction": 1.0},
            {"disclosure_fraction": 0.0},
        ],
    )
    def test_invalid_fields(self, fields):
        values = {"r": R, "sigma_prime2": SIGMA_PRIME2, **fields}
        with pytest.raises(ValidationError):
            ProtocolParams(**values)


class TestPreparation:
    @pytest.mark.parametrize("basis", list(Basis))
    def test_prepared_state_is_symmetric(self, registry, params, basis):
        alpha = registry.register("A", params.sigma2)
        m3 = bob_prepare(basis, alpha, params, registry)

        expected = 0.25 * math.exp(2 * R)
        assert variance(m3.x1, registry) == pytest.approx(expected, rel=1e-12)
        assert variance(m3.x2, registry) == pytest.approx(expected, rel=1e-12)
        assert registry.covariance(m3.x1, m3.x2) == 0.0

    def test_bases_indistinguishable_on_condition(self, params):
        assert basis_indistinguishable(params)

    def test_bases_distinguishable_off_condition(self):
        assert not basis_indistinguishable(ProtocolParams(r=R, sigma_prime2=SIGMA_PRIME2, sigma2=10.0))


class TestEncodeDecode:
    def test_zero_symbol_is_identity(self, registry, params):
        m = bob_prepare(Basis.P, 0.7, params, registry)
        assert alice_encode(m, 0.0) == m

    def test_encoding_adds_modulation_variance(self, registry, params):
        m = bob_prepare(Basis.P, 0.0, params, registry)
        x = registry.register("X", SIGMA_PRIME2)
        encoded = alice_encode(m, x)

        assert variance(encoded.x1, registry) == pytest.approx(variance(m.x1, registry) + SIGMA_PRIME2)
        assert variance(encoded.x2, registry) == pytest.approx(variance(m.x2, registry) + SIGMA_PRIME2)
        assert displace(encoded, -x, -x) == m

    @pytest.mark.parametrize("basis", list(Basis))
    def test_lossless_measurement(self, registry, params, basis):
        alpha = registry.register("A", params.sigma2)
        x = registry.register("X", SIGMA_PRIME2)
        measured = bob_decode(alice_encode(bob_prepare(basis, alpha, params, registry), x), basis, alpha)
        (alpha_id,) = alpha.coefficients
        (x_id,) = x.coefficients

        assert measured.coefficient(alpha_id) == 0.0
        assert measured.coefficient(x_id) == 1.0
        assert variance(measured, registry) == pytest.approx(0.25 * math.exp(-2 * R) + SIGMA_PRIME2, rel=1e-12)

    def test_zero_symbol_leaves_squeezed_noise(self, registry, params):
        alpha = registry.register("A", params.sigma2)
        measured = bob_decode(alice_encode(bob_prepare(Basis.P, alpha, params, registry), 0.0), Basis.P, alpha)

        assert variance(measured, registry) == pytest.approx(0.25 * math.exp(-2 * R), rel=1e-12)


class TestRoundTrace:
    def test_key_symbol_enters_with_unit_weight(self, symbolic_round):
        trace, _ = symbolic_round()
        (x_id,) = trace.x.coefficients

        assert trace.measured.coefficient(x_id) == 1.0
        assert trace.tap is None

    @pytest.mark.parametrize("eta1, eta2", [(0.9, 0.8), (0.5, 0.5), (0.2, 1.0)])
    def test_measured_variance_matches_closed_form(self, symbolic_round, eta1, eta2):
        for basis in Basis:
            trace, registry = symbolic_round(basis=basis, eta1=eta1, eta2=eta2)
            expected, _ = bob_variances(R, SIGMA_PRIME2, eta1, eta2)
            assert registry.variance(trace.measured) == pytest.approx(expected, rel=1e-10)

    def test_attack_exposes_taps(self, symbolic_round):
        trace, registry = symbolic_round(eta1=0.8, eta2=0.7)

        assert trace.tap is not None
        assert registry.variance(trace.tap.mode8.x1) > 0


def make_records(n_p, n_perp, seed=0, residual_scale=0.0):
    rng = np.random.default_rng(seed)
    records = []
    for basis, count in ((Basis.P, n_p), (Basis.P_PERP, n_perp)):
        for _ in range(count):
            x = float(rng.normal(0.0, 10.0))
            records.append(RunRecord(
                basis=basis,
                alpha=float(rng.normal(0.0, 10.0)),
                x=x,
                bob_measurement=x + residual_scale * float(rng.normal()),
                disclosed=True,
            ))
    return records


class TestFidelityEstimator:
    def test_requires_records_in_both_bases(self, params):
        records = make_records(MIN_DISCLOSED_PER_BASIS, MIN_DISCLOSED_PER_BASIS - 1)

        with pytest.raises(EstimationError) as e:
            estimate_fidelity(records, params)

        assert e.value.required == 30
        assert e.value.available == 29
        assert "required 30" in str(e.value)

    def test_degenerate_residuals(self, params):
        estimate = fidelity_estimate(make_records(40, 40), params)

        assert estimate.v1 == pytest.approx(0.0, abs=1e-20)
        assert math.isfinite(estimate.fidelity)
        assert estimate.fidelity == pytest.approx(math.sqrt(2.0), rel=1e-6)

    def test_fitted_transmittances_stay_physical(self, params):
        estimate = fidelity_estimate(make_records(200, 200, residual_scale=0.05 * math.exp(-R)), params)

        assert 0.0 <= estimate.eta1_fit <= 1.0
        assert 0.0 <= estimate.eta2_fit <= 1.0
        assert estimate.n_p == 200 and estimate.n_p_perp == 200


class TestRunSession:
    @pytest.fixture
    def small(self):
        return ProtocolParams(r=R, sigma_prime2=SIGMA_PRIME2, n_runs=2000, disclosure_fraction=0.2)

    def test_deterministic_for_a_seed(self, small):
        first = run_session(small, LossyLineAttack(eta=0.9), seed=5)
        second = run_session(small, LossyLineAttack(eta=0.9), seed=5)

        assert first.records == second.records
        assert first.empirical_fidelity == second.empirical_fidelity

    def test_different_seeds_differ(self, small):
        assert run_session(small, seed=1).records != run_session(small, seed=2).records

    def test_every_undisclosed_run_joins_the_key(self, small):
        result = run_session(small, NoAttack(), seed=3)

        assert result.n_disclosed == 400
        assert sum(rec.disclosed for rec in result.records) == 400
        assert result.key_length == small.n_runs - result.n_disclosed
        assert result.key_fraction == pytest.approx(0.8)
        undisclosed = [rec.x for rec in result.records if not rec.disclosed]
        assert result.key_alice == undisclosed

    def test_too_few_disclosed_runs(self):
        params = ProtocolParams(r=R, sigma_prime2=SIGMA_PRIME2, n_runs=100, disclosure_fraction=0.01)
        with pytest.raises(EstimationError):
            run_session(params, seed=0)

    @pytest.mark.slow
    def test_no_attack_reaches_capacity(self, params):
        result = run_session(params, NoAttack(), seed=2024)

        assert result.empirical_mutual_info_bits == pytest.approx(capacity_no_eve(R, SIGMA_PRIME2), abs=0.1)
        assert result.empirical_fidelity == pytest.approx(1.0, abs=0.01)

    @pytest.mark.slow
    def test_lossy_line_fidelity_matches_closed_form(self):
        params = ProtocolParams(r=R, sigma_prime2=SIGMA_PRIME2, n_runs=100_000, disclosure_fraction=0.5)
        result = run_session(params, LossyLineAttack(eta=0.9), seed=17)

        expected = fidelity_at(R, SIGMA_PRIME2, 0.9, 0.9)
        assert abs(result.empirical_fidelity - expected) <= 4 * result.fidelity_stderr

    @pytest.mark.slow
    def test_heavy_tapping_lowers_fidelity(self):
        params = ProtocolParams(r=R, sigma_prime2=SIGMA_PRIME2, n_runs=20_000)
        result = run_session(params, BeamSplitterAttack(eta1=0.5, eta2=0.5), seed=9)

        assert result.empirical_fidelity < 1.0 - 10 * result.fidelity_stderr

    @pytest.mark.slow
    @pytest.mark.parametrize("eta1, eta2", [(0.8, 0.7), (0.95, 0.95)])
    def test_attacked_snr_matches_closed_form(self, eta1, eta2):
        params = ProtocolParams(r=R, sigma_prime2=SIGMA_PRIME2, n_runs=100_000)
        result = run_session(params, BeamSplitterAttack(eta1=eta1, eta2=eta2), seed=41)

        assert result.empirical_snr == pytest.approx(snr_ab(R, SIGMA_PRIME2, eta1, eta2), rel=0.03)

    @pytest.mark.slow
    @pytest.mark.parametrize("eta1", [0.5, 0.8, 1.0])
    @pytest.mark.parametrize("eta2", [0.5, 0.8, 1.0])
    def test_measurement_variance_matches_closed_form(self, eta1, eta2):
        params = ProtocolParams(r=R, sigma_prime2=SIGMA_PRIME2, n_runs=100_000)
        attack = NoAttack() if (eta1, eta2) == (1.0, 1.0) else BeamSplitterAttack(eta1=eta1, eta2=eta2)
        result = run_session(params, attack, seed=31)

        expected, _ = bob_variances(R, SIGMA_PRIME2, eta1, eta2)
        stderr = expected * math.sqrt(2.0 / (result.key_length - 1))
        assert abs(result.measurement_variance - expected) <= 4 * stderr
