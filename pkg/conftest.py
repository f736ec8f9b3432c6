"""Shared fixtures for the pingpong_qkd test suite."""

import pytest

from pingpong_qkd.gaussian_core import SourceRegistry
from pingpong_qkd.models import BeamSplitterAttack, Basis, NoAttack, ProtocolParams
from pingpong_qkd.protocol import trace_round

# Default operating point: strong squeezing, wide key alphabet.
R = 3.0
SIGMA_PRIME2 = 100.0


@pytest.fixture
def registry():
    return SourceRegistry()


@pytest.fixture
def params():
    return ProtocolParams(r=R, sigma_prime2=SIGMA_PRIME2)


@pytest.fixture
def symbolic_round():
    """Build one round symbolically: (trace, registry) for the given attack point."""

    def build(basis=Basis.P, r=R, sigma_prime2=SIGMA_PRIME2, eta1=1.0, eta2=1.0, k=None, attack=None):
        registry = SourceRegistry()
        if attack is None:
            attack = BeamSplitterAttack(eta1=eta1, eta2=eta2, k=k) if (eta1, eta2, k) != (1.0, 1.0, None) else NoAttack()
        round_params = ProtocolParams(r=r, sigma_prime2=sigma_prime2)
        return trace_round(basis, round_params, attack, registry), registry

    return build
