"""Exception hierarchy.

Every numerical failure derives from :class:`MilneError` so the CLI can map it
to a single exit code; configuration problems derive from :class:`ConfigError`.
"""


class MilneError(Exception):
    """Base class for numerical failures."""


class ConfigError(Exception):
    """Malformed or missing configuration."""


# domain
class EnergyOutOfRange(MilneError):
    pass


class NoMinimum(MilneError):
    pass


class DegenerateTurningPoints(MilneError):
    pass


# schrodinger
class NonFiniteInput(MilneError):
    pass


class IntegrationOverflow(MilneError):
    pass


class InconsistentWronskian(MilneError):
    pass


class EigenvalueDegenerate(MilneError):
    """The quantum-number continuation is (numerically) an integer."""


# ermakov
class NegativeQuadraticForm(MilneError):
    pass


class PhaseUnwrapMismatch(MilneError):
    pass


class RealityViolated(MilneError):
    pass


class ReconstructionMismatch(MilneError):
    pass


class InvertedMismatch(MilneError):
    pass


class BandUndefined(MilneError):
    pass


# semiclassical
class DerivativeVanishes(MilneError):
    pass


class ArccosDomain(MilneError):
    pass


# spectral
class BracketNotFound(MilneError):
    pass


class OutOfRange(MilneError):
    pass


class GridBufferWarning(RuntimeWarning):
    """The forbidden buffer beyond a turning point is thinner than advised."""


class ClampWarning(RuntimeWarning):
    """A superposition parameter was clamped near an eigenvalue."""
