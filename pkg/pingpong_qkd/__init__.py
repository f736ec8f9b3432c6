"""
Deterministic continuous-variable ping-pong QKD

Gaussian quadrature propagation through the honest ping-pong channel and the
beam-splitter attack, closed-form information rates and detection fidelity,
seeded Monte Carlo sessions, and threshold / figure-table generation.
"""

from .errors import (
    EstimationError,
    IntegrityError,
    ParameterDomainError,
    PingPongError,
    SolverError,
    UsageError,
)
from .gaussian_core import VACUUM_VARIANCE, LinearForm, Mode, NoiseSource, SourceRegistry
from .models import (
    Basis,
    BeamSplitterAttack,
    EnvelopePoint,
    EveTap,
    LossyLineAttack,
    NoAttack,
    ProtocolParams,
    RatePoint,
    RunConfig,
    RunRecord,
    SessionResult,
    ThresholdResult,
)

__version__ = "1.0.0"
