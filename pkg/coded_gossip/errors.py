"""Exception hierarchy for coded-gossip.

Each exception carries the CLI exit code it maps to, so the command layer can
translate failures without knowing which module raised them.
"""


class GossipError(Exception):
    """Base class for all coded-gossip errors."""

    exit_code = 1


class ConfigError(GossipError):
    """Exception raised for invalid or unreadable run configuration."""

    exit_code = 2


class FieldSpecError(GossipError):
    """Exception raised when (p, m, modulus) does not describe a finite field."""

    exit_code = 2


class ZeroInverse(GossipError):
    """Exception raised when inverting the zero element."""

    exit_code = 4


class DimensionMismatch(GossipError):
    """Exception raised when vector lengths disagree with the ambient dimension."""

    exit_code = 4


class TooLarge(GossipError):
    """Exception raised when an exhaustive enumeration exceeds its guard."""

    exit_code = 2


class KTooLarge(TooLarge):
    """Exception raised when 2^k subsets are too many to enumerate."""

    pass


class DenominatorTooLarge(GossipError):
    """Exception raised when rational demands need a denominator above the configured bound."""

    exit_code = 2


class InsufficientCapacity(GossipError):
    """Exception raised when a capacity vector is outside the Slepian-Wolf region for a node."""

    exit_code = 2


class SimulationTimeout(GossipError):
    """Exception raised when a process does not finish within max_rounds.

    Attributes:
        rounds: Number of rounds simulated before giving up
        partial: Optional partial result (e.g. a flooding trajectory)
    """

    exit_code = 3

    def __init__(self, message: str, rounds: int = 0, partial=None):
        super().__init__(message)
        self.rounds = rounds
        self.partial = partial


class InvariantViolation(GossipError):
    """Exception raised when an internal consistency check fails."""

    exit_code = 4
