"""
Data models for the ping-pong QKD toolkit

This module defines the Pydantic models shared by the protocol, adversary,
analysis and CLI layers: protocol parameters, per-run records, session
results, attack configurations and the closed-form result tables.
"""

import logging
import math
from enum import Enum
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .gaussian_core import LinearForm, Mode, combine, masking_variance

logger = logging.getLogger(__name__)


class Basis(str, Enum):
    """Bob's preparation operator for one run"""
    P = "P"
    P_PERP = "P_PERP"


class ProtocolParams(BaseModel):
    """
    Parameters of one ping-pong session

    ``sigma2`` is Bob's masking variance. Left out, it is derived from ``r``
    so that both bases prepare states with the same covariance; given
    explicitly and off that condition, a warning is logged and the value is
    kept.
    """
    r: float = Field(
        ...,
        description="Squeezing factor",
        examples=[3.0],
        gt=0
    )
    sigma2: Optional[float] = Field(
        None,
        description="Bob's masking variance; derived from r when omitted",
        examples=[100.8566],
        ge=0
    )
    sigma_prime2: float = Field(
        ...,
        description="Variance of Alice's Gaussian key symbols",
        examples=[100.0],
        gt=0
    )
    n_runs: int = Field(
        100000,
        description="Number of rounds in a session",
        examples=[100000],
        ge=1
    )
    disclosure_fraction: float = Field(
        0.1,
        description="Fraction of runs Alice discloses for eavesdropper detection",
        examples=[0.1],
        gt=0,
        lt=1
    )

    @model_validator(mode="after")
    def _fill_masking_variance(self) -> "ProtocolParams":
        expected = masking_variance(self.r)
        if self.sigma2 is None:
            self.sigma2 = expected
        elif not math.isclose(self.sigma2, expected, rel_tol=1e-9):
            logger.warning(
                f"sigma2={self.sigma2:.6g} violates the indistinguishability condition "
                f"(expected {expected:.6g} for r={self.r}); bases become distinguishable"
            )
        return self


class RunRecord(BaseModel):
    """One protocol round as seen by Alice and Bob"""
    basis: Basis = Field(..., description="Bob's basis for this run", examples=["P"])
    alpha: float = Field(..., description="Bob's masking draw A", examples=[-3.2])
    x: float = Field(..., description="Alice's key symbol", examples=[12.7])
    bob_measurement: float = Field(
        ...,
        description="Bob's homodyne result on the restored mode",
        examples=[12.69]
    )
    disclosed: bool = Field(
        False,
        description="Whether Alice disclosed this run for detection",
        examples=[False]
    )


class FidelityEstimate(BaseModel):
    """Result of the disclosed-run fidelity estimator"""
    fidelity: float = Field(..., description="Estimated fidelity", examples=[0.998])
    v1: float = Field(
        ...,
        description="Pooled sample variance of the measured output quadrature",
        examples=[0.251]
    )
    v2: float = Field(
        ...,
        description="Conjugate output variance from the fitted transmittances",
        examples=[0.25]
    )
    eta1_fit: float = Field(..., description="Fitted forward transmittance", examples=[1.0])
    eta2_fit: float = Field(..., description="Fitted backward transmittance", examples=[1.0])
    n_p: int = Field(..., description="Disclosed runs prepared in basis P", ge=0)
    n_p_perp: int = Field(..., description="Disclosed runs prepared in basis P_PERP", ge=0)
    stderr: float = Field(
        ...,
        description="Delta-method standard error of the fidelity",
        examples=[0.003],
        ge=0
    )


class SessionResult(BaseModel):
    """Outcome of a simulated session"""
    records: List[RunRecord] = Field(..., description="Every run, disclosed or not")
    empirical_snr: float = Field(
        ...,
        description="Bob's signal-to-noise ratio from undisclosed runs",
        examples=[1612.4]
    )
    empirical_mutual_info_bits: float = Field(
        ...,
        description="Half log2 of one plus the empirical SNR",
        examples=[8.65]
    )
    empirical_fidelity: float = Field(..., description="Estimated fidelity", examples=[0.999])
    fidelity_stderr: float = Field(..., description="Standard error of the fidelity", ge=0)
    fidelity_estimate: FidelityEstimate = Field(..., description="Full estimator output")
    measurement_variance: float = Field(
        ...,
        description="Sample variance of Bob's undisclosed measurements",
        examples=[100.0]
    )
    key_alice: List[float] = Field(..., description="Undisclosed key symbols")
    key_bob: List[float] = Field(..., description="Bob's measurements for the undisclosed runs")
    n_disclosed: int = Field(..., description="Runs disclosed for detection", ge=0)
    key_fraction: float = Field(
        ...,
        description="Key length over number of runs",
        examples=[0.9]
    )
    seed: Optional[int] = Field(None, description="Seed the session was run with")

    @property
    def key_length(self) -> int:
        return len(self.key_alice)


class NoAttack(BaseModel):
    """No eavesdropper on the line"""
    model_config = ConfigDict(frozen=True)

    variant: Literal["none"] = "none"

    def transmittances(self) -> Tuple[float, float]:
        return 1.0, 1.0


class BeamSplitterAttack(BaseModel):
    """Eve taps both the forward and the backward beam"""
    model_config = ConfigDict(frozen=True)

    variant: Literal["beam_splitters"] = "beam_splitters"
    eta1: float = Field(
        ...,
        description="Transmittance of the forward tap",
        examples=[0.9],
        ge=0,
        le=1
    )
    eta2: float = Field(
        ...,
        description="Transmittance of the backward tap",
        examples=[0.9],
        ge=0,
        le=1
    )
    k: Optional[float] = Field(
        None,
        description="Fixed combining weight; None selects the optimal weight",
        examples=[None, 0.5]
    )

    def transmittances(self) -> Tuple[float, float]:
        return self.eta1, self.eta2


class LossyLineAttack(BaseModel):
    """Eve replaces a line of transmittance eta by a lossless one plus her taps"""
    model_config = ConfigDict(frozen=True)

    variant: Literal["lossy_line"] = "lossy_line"
    eta: float = Field(
        ...,
        description="Transmittance of the line Eve replaces",
        examples=[0.9],
        ge=0,
        le=1
    )

    def transmittances(self) -> Tuple[float, float]:
        return self.eta, self.eta


AttackConfig = Annotated[
    Union[NoAttack, BeamSplitterAttack, LossyLineAttack],
    Field(discriminator="variant"),
]


class EveTap(BaseModel):
    """Eve's two intercepted modes and her combining weight"""
    model_config = ConfigDict(frozen=True)

    mode8: Mode = Field(..., description="Forward tap, second output of the first beam splitter")
    mode9: Mode = Field(..., description="Backward tap, second output of the second beam splitter")
    k: float = Field(..., description="Weight of the forward tap in Eve's detector mode")

    def combined(self) -> Mode:
        """Eve's detector mode mode9 - k * mode8."""
        return combine([self.mode9, self.mode8], [1.0, -self.k])


class RoundTrace(BaseModel):
    """Every Heisenberg-picture mode of one round, built on a single registry"""
    model_config = ConfigDict(frozen=True)

    basis: Basis
    alpha: LinearForm = Field(..., description="Unit form of Bob's masking source A")
    x: LinearForm = Field(..., description="Unit form of Alice's key source X")
    mode3: Mode = Field(..., description="Prepared state sent to Alice")
    mode4: Mode = Field(..., description="State reaching Alice")
    mode5: Mode = Field(..., description="State after Alice's encoding")
    mode6: Mode = Field(..., description="State returning to Bob")
    mode7: Mode = Field(..., description="Returned state after Bob removes his displacement")
    measured: LinearForm = Field(..., description="Quadrature Bob measures")
    output: Mode = Field(..., description="Returned state mapped back onto the vacuum reference")
    tap: Optional[EveTap] = Field(None, description="Eve's modes, when an attack is present")

    @property
    def output_measured(self) -> LinearForm:
        """Output quadrature on the measured axis of this basis."""
        return self.output.x1 if self.basis == Basis.P else self.output.x2

    @property
    def output_conjugate(self) -> LinearForm:
        return self.output.x2 if self.basis == Basis.P else self.output.x1


class RatePoint(BaseModel):
    """Closed-form information rates and fidelity at one (eta1, eta2)"""
    eta1: float = Field(..., description="Forward transmittance", examples=[0.9])
    eta2: float = Field(..., description="Backward transmittance", examples=[0.9])
    i_ab: float = Field(..., description="Alice-Bob mutual information in bits", examples=[4.1])
    i_ae: float = Field(..., description="Eve's maximal information in bits", examples=[2.2])
    delta_i: float = Field(..., description="i_ab - i_ae in bits", examples=[1.9])
    fidelity: float = Field(..., description="Detection fidelity", examples=[0.032])


class ThresholdResult(BaseModel):
    """Loss threshold and critical fidelity with solver metadata"""
    eta_star: float = Field(..., description="Lossy-line transmittance where delta_i = 0", examples=[0.845])
    f_critical: float = Field(..., description="Fidelity where the envelope crosses zero", examples=[0.021])
    grid_resolution: float = Field(..., description="Spacing of the (eta1, eta2) grid", examples=[0.005])
    tolerance: float = Field(..., description="Bisection interval tolerance", examples=[1e-4])
    grid_n: int = Field(..., description="Grid points per axis", examples=[200])
    bins: int = Field(..., description="Fidelity bins of the envelope", examples=[50])
    bin_width: float = Field(..., description="Width of one fidelity bin", examples=[0.02])


class EnvelopePoint(BaseModel):
    """One fidelity bin of the lower envelope of delta_i"""
    fidelity_bin: float = Field(..., description="Bin centre", examples=[0.5])
    lower: float = Field(..., description="Lower bin edge")
    upper: float = Field(..., description="Upper bin edge")
    delta_i_min: float = Field(..., description="Minimum delta_i in bits", examples=[3.1])
    count: int = Field(..., description="Grid points falling in the bin", ge=0)


class Command(str, Enum):
    """Command-line sub-commands"""
    analyze = "analyze"
    sweep = "sweep"
    simulate = "simulate"
    thresholds = "thresholds"


class OutputFormat(str, Enum):
    """Machine-readable output formats"""
    csv = "csv"
    json = "json"


class RunConfig(BaseModel):
    """
    Validated configuration of one command-line invocation

    Built from defaults, then a key=value config file, then command-line
    flags, each layer overriding the previous one.
    """
    model_config = ConfigDict(extra="forbid")

    command: Command = Field(..., description="Sub-command to run", examples=["analyze"])
    r: float = Field(3.0, description="Squeezing factor", examples=[3.0], gt=0)
    sigma_prime2: float = Field(100.0, description="Variance of Alice's key symbols", examples=[100.0], gt=0)
    eta1: float = Field(1.0, description="Forward transmittance", examples=[0.9], ge=0, le=1)
    eta2: float = Field(1.0, description="Backward transmittance", examples=[0.9], ge=0, le=1)
    eta: Optional[float] = Field(
        None,
        description="Lossy-line transmittance; sets eta1 = eta2 = eta",
        examples=[0.9],
        ge=0,
        le=1
    )
    k: Optional[float] = Field(None, description="Fixed combining weight for Eve", examples=[0.5])
    n_runs: int = Field(100000, description="Rounds per simulated session", examples=[100000], ge=1)
    grid_n: int = Field(200, description="Grid points per transmittance axis", examples=[200], ge=2)
    bins: int = Field(50, description="Fidelity bins of the envelope", examples=[50], ge=1)
    seed: int = Field(0, description="Seed of the simulation", examples=[0], ge=0)
    disclosure_fraction: float = Field(
        0.1,
        description="Fraction of runs disclosed for detection",
        examples=[0.1],
        gt=0,
        lt=1
    )
    output_path: Optional[str] = Field(None, description="Output file; stdout when omitted", examples=["fig2.csv"])
    format: OutputFormat = Field(OutputFormat.csv, description="Table format for sweeps", examples=["csv"])
    fig: int = Field(2, description="Figure whose data a sweep produces (2, 3 or 4)", examples=[4], ge=2, le=4)
    tol: float = Field(1e-4, description="Bisection tolerance", examples=[1e-4], gt=0)
    f_critical: float = Field(
        0.02,
        description="Abort when the estimated fidelity falls below this value",
        examples=[0.02],
        ge=0
    )
    runs_out: Optional[str] = Field(None, description="Per-run CSV dump for simulate", examples=["runs.csv"])

    @model_validator(mode="after")
    def _apply_lossy_line(self) -> "RunConfig":
        if self.eta is not None:
            self.eta1 = self.eta
            self.eta2 = self.eta
        return self
