"""Exception types shared across the simulator."""

from __future__ import annotations


class CfsimError(Exception):
    """Base class for all simulator errors."""


class ModeError(CfsimError, ValueError):
    """Unknown, duplicate, or otherwise invalid mode reference."""


class SpaceMismatchError(CfsimError, ValueError):
    """Two states do not live in the same (mode table, plate dimension) space."""


class CircuitConstructionError(CfsimError, ValueError):
    """A circuit violates a structural rule (layer collisions, bad wiring)."""


class EmptyBranchError(CfsimError):
    """A post-selection branch carries (numerically) zero probability.

    Raised only when a normalized branch is requested; dark-port checks that
    merely read the probability never see this.
    """

    def __init__(self, probability: float):
        self.probability = probability
        super().__init__(f"post-selection branch has probability {probability:.3e}")


class UndefinedWeakValueError(CfsimError):
    """Post-selected amplitude is zero, so weak values are undefined.

    Carries the offending amplitude so callers can report it.
    """

    def __init__(self, post_amplitude: complex):
        self.post_amplitude = post_amplitude
        super().__init__(
            "post-selected amplitude is zero (|A| = "
            f"{abs(post_amplitude):.3e}); weak values are undefined"
        )


class NumericInvariantError(CfsimError):
    """A numeric sanity check (e.g. probabilities summing to 1) failed."""


class DslError(CfsimError, ValueError):
    """Circuit-file parse or validation failure, with source position."""

    def __init__(self, message: str, line: int, column: int = 1):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")
