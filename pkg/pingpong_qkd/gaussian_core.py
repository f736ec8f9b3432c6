"""
Gaussian quadrature algebra

Every quadrature in the protocol is an exact linear combination of
independent Gaussian noise sources plus a deterministic mean. Second moments
are read off the coefficients (no sampling), and Monte Carlo sampling draws
one realisation per source so that every form evaluated in the same call sees
the same noise.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import IntegrityError, ParameterDomainError, UsageError

logger = logging.getLogger(__name__)

# Quadrature convention X1 = (a + a†)/2: the vacuum variance is 1/4.
VACUUM_VARIANCE = 0.25

Number = Union[int, float]
Seed = Union[None, int, np.random.SeedSequence, np.random.Generator]


def masking_variance(r: float) -> float:
    """Variance that lifts a squeezed quadrature to its anti-squeezed partner."""
    return VACUUM_VARIANCE * (math.exp(2 * r) - math.exp(-2 * r))


class NoiseSource(BaseModel):
    """An independent zero-mean Gaussian source held by a registry"""
    model_config = ConfigDict(frozen=True)

    id: str = Field(
        ...,
        description="Registry-unique identifier",
        examples=["vac.x1#0"]
    )
    label: str = Field(
        ...,
        description="Human readable label the source was registered under",
        examples=["vac.x1"]
    )
    variance: float = Field(
        ...,
        description="Variance in quadrature units",
        examples=[0.25],
        ge=0
    )


def _prune(coefficients: Dict[str, float]) -> Dict[str, float]:
    return {sid: c for sid, c in coefficients.items() if c != 0.0}


class LinearForm(BaseModel):
    """
    A quadrature as sum_i c_i * source_i + mean

    Forms are immutable; arithmetic returns new forms and drops coefficients
    that become exactly zero.
    """
    model_config = ConfigDict(frozen=True)

    coefficients: Dict[str, float] = Field(
        default_factory=dict,
        description="Coefficient per noise source id"
    )
    mean: float = Field(
        0.0,
        description="Deterministic offset"
    )

    def coefficient(self, source_id: str) -> float:
        return self.coefficients.get(source_id, 0.0)

    def without(self, source_id: str) -> "LinearForm":
        """The same form with one source removed."""
        rest = {sid: c for sid, c in self.coefficients.items() if sid != source_id}
        return LinearForm(coefficients=rest, mean=self.mean)

    def is_zero(self) -> bool:
        return not self.coefficients and self.mean == 0.0

    def __add__(self, other: Union["LinearForm", Number]) -> "LinearForm":
        if isinstance(other, (int, float)):
            return LinearForm(coefficients=dict(self.coefficients), mean=self.mean + other)
        if not isinstance(other, LinearForm):
            return NotImplemented
        merged = dict(self.coefficients)
        for sid, c in other.coefficients.items():
            merged[sid] = merged.get(sid, 0.0) + c
        return LinearForm(coefficients=_prune(merged), mean=self.mean + other.mean)

    __radd__ = __add__

    def __neg__(self) -> "LinearForm":
        return self * -1.0

    def __sub__(self, other: Union["LinearForm", Number]) -> "LinearForm":
        return self + (-other)

    def __rsub__(self, other: Number) -> "LinearForm":
        return (-self) + other

    def __mul__(self, scalar: Number) -> "LinearForm":
        if not isinstance(scalar, (int, float)):
            return NotImplemented
        scaled = {sid: c * scalar for sid, c in self.coefficients.items()}
        return LinearForm(coefficients=_prune(scaled), mean=self.mean * scalar)

    __rmul__ = __mul__


Displacement = Union[Number, LinearForm]


class Mode(BaseModel):
    """One optical mode in the Heisenberg picture: the (X1, X2) quadrature pair"""
    model_config = ConfigDict(frozen=True)

    x1: LinearForm = Field(..., description="Amplitude quadrature (a + a†)/2")
    x2: LinearForm = Field(..., description="Phase quadrature (a - a†)/2i")

    def scale(self, c1: Number, c2: Number) -> "Mode":
        return Mode(x1=self.x1 * c1, x2=self.x2 * c2)

    def __add__(self, other: "Mode") -> "Mode":
        if not isinstance(other, Mode):
            return NotImplemented
        return Mode(x1=self.x1 + other.x1, x2=self.x2 + other.x2)

    def __sub__(self, other: "Mode") -> "Mode":
        if not isinstance(other, Mode):
            return NotImplemented
        return Mode(x1=self.x1 - other.x1, x2=self.x2 - other.x2)

    def __mul__(self, scalar: Number) -> "Mode":
        return self.scale(scalar, scalar)

    __rmul__ = __mul__


class SourceRegistry:
    """
    Append-only registry of independent Gaussian sources.

    One registry backs one simulation; forms built from it may only reference
    ids it issued. The registry owns exact second moments and joint sampling.
    """

    def __init__(self):
        self._sources: Dict[str, NoiseSource] = {}

    def __len__(self) -> int:
        return len(self._sources)

    @property
    def sources(self) -> List[NoiseSource]:
        """Sources in registration order."""
        return list(self._sources.values())

    def register(self, label: str, variance: float) -> LinearForm:
        """
        Register a fresh independent source.

        Returns:
            LinearForm: the unit form of the new source

        Raises:
            ParameterDomainError: If the variance is negative
        """
        if variance < 0:
            raise ParameterDomainError(f"Source '{label}' has negative variance {variance}")
        source_id = f"{label}#{len(self._sources)}"
        self._sources[source_id] = NoiseSource(id=source_id, label=label, variance=variance)
        logger.debug(f"Registered source {source_id} with variance {variance:.6g}")
        return LinearForm(coefficients={source_id: 1.0})

    def vacuum(self, label: str) -> LinearForm:
        return self.register(label, VACUUM_VARIANCE)

    def variance_of(self, source_id: str) -> float:
        try:
            return self._sources[source_id].variance
        except KeyError:
            raise IntegrityError(f"Unknown noise source '{source_id}'") from None

    def check(self, *forms: LinearForm) -> None:
        """Raise IntegrityError if any form references an unregistered source."""
        for form in forms:
            for sid in form.coefficients:
                if sid not in self._sources:
                    raise IntegrityError(f"Unknown noise source '{sid}'")

    def covariance(self, f: LinearForm, g: LinearForm) -> float:
        self.check(f, g)
        shared = f.coefficients.keys() & g.coefficients.keys()
        return math.fsum(
            f.coefficients[sid] * g.coefficients[sid] * self._sources[sid].variance
            for sid in sorted(shared)
        )

    def variance(self, f: LinearForm) -> float:
        return self.covariance(f, f)

    def sample_joint(
        self,
        forms: Sequence[LinearForm],
        rng_seed: Seed = None,
        size: Optional[int] = None,
    ) -> List:
        """
        Draw joint realisations of several forms.

        Every registered source is drawn once per sample, in registration
        order, so results are a deterministic function of the seed and the
        registry.

        Args:
            forms: Forms to evaluate on the shared draw
            rng_seed: Seed, SeedSequence or an existing numpy Generator
            size: Number of samples; None for a single realisation

        Returns:
            List of floats (size=None) or of numpy arrays of length ``size``
        """
        self.check(*forms)
        rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
        n_samples = 1 if size is None else int(size)
        if n_samples < 1:
            raise UsageError(f"sample size must be positive, got {size}")

        ids = list(self._sources)
        column = {sid: i for i, sid in enumerate(ids)}
        scales = np.sqrt(np.array([self._sources[sid].variance for sid in ids], dtype=float))
        draws = rng.standard_normal((len(ids), n_samples)) * scales[:, None]

        weights = np.zeros((len(forms), len(ids)))
        for row, form in enumerate(forms):
            for sid, c in form.coefficients.items():
                weights[row, column[sid]] = c
        means = np.array([form.mean for form in forms], dtype=float)
        values = weights @ draws + means[:, None]

        if size is None:
            return [float(v) for v in values[:, 0]]
        return [values[row] for row in range(len(forms))]


def new_vacuum_mode(registry: SourceRegistry, label: str = "vac") -> Mode:
    """A fresh vacuum mode: two new independent sources of variance 1/4."""
    return Mode(x1=registry.vacuum(f"{label}.x1"), x2=registry.vacuum(f"{label}.x2"))


def squeeze(m: Mode, r: float) -> Mode:
    """S(r): X1 scaled by e^{-r}, X2 by e^{r}."""
    return m.scale(math.exp(-r), math.exp(r))


def displace(m: Mode, dx: Displacement = 0.0, dy: Displacement = 0.0) -> Mode:
    """Shift X1 by dx and X2 by dy; either may be a random source form."""
    return Mode(x1=m.x1 + dx, x2=m.x2 + dy)


def beam_splitter(a: Mode, b: Mode, eta: float) -> Tuple[Mode, Mode]:
    """
    Beam splitter with transmittance eta.

    out1 = sqrt(eta) a + sqrt(1-eta) b
    out2 = sqrt(eta) b - sqrt(1-eta) a

    Raises:
        ParameterDomainError: If eta is outside [0, 1]
    """
    if not 0.0 <= eta <= 1.0:
        raise ParameterDomainError(f"Beam splitter transmittance must lie in [0, 1], got {eta}")
    t = math.sqrt(eta)
    s = math.sqrt(1.0 - eta)
    return t * a + s * b, t * b - s * a


def combine(modes: Sequence[Mode], weights: Sequence[Number]) -> Mode:
    """Weighted sum of modes, per quadrature."""
    if not modes or len(modes) != len(weights):
        raise UsageError(
            f"combine needs matching, non-empty modes and weights (got {len(modes)} and {len(weights)})"
        )
    total = modes[0] * weights[0]
    for mode, weight in zip(modes[1:], weights[1:]):
        total = total + mode * weight
    return total


def variance(f: LinearForm, registry: SourceRegistry) -> float:
    return registry.variance(f)


def covariance(f: LinearForm, g: LinearForm, registry: SourceRegistry) -> float:
    return registry.covariance(f, g)


def sample_joint(
    forms: Sequence[LinearForm],
    registry: SourceRegistry,
    rng_seed: Seed = None,
    size: Optional[int] = None,
) -> List:
    return registry.sample_joint(forms, rng_seed, size)


def signal_to_noise(form: LinearForm, signal: LinearForm, registry: SourceRegistry) -> float:
    """
    Ratio of the variance carried by one source to the rest of the form.

    Args:
        form: The observed quadrature
        signal: Unit form of the signal source (exactly one coefficient)
        registry: Registry holding every source

    Raises:
        UsageError: If ``signal`` is not a single-source form
    """
    if len(signal.coefficients) != 1:
        raise UsageError("signal must reference exactly one source")
    (signal_id,) = signal.coefficients
    registry.check(form, signal)
    signal_power = form.coefficient(signal_id) ** 2 * registry.variance_of(signal_id)
    noise_power = registry.variance(form.without(signal_id))
    if noise_power == 0.0:
        return math.inf if signal_power > 0.0 else 0.0
    return signal_power / noise_power
