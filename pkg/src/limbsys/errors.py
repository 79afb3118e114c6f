"""Exception types shared across the toolkit.

Every error carries a stable machine-readable ``code`` so command-line
consumers can dispatch on it without parsing messages.
"""
from __future__ import annotations


class LimbsysError(Exception):
    """Base class for domain errors raised by this package."""

    code = "Error"


class MassMismatch(LimbsysError):
    """Total masses of the two marginals disagree."""

    code = "MassMismatch"


class ShapeMismatch(LimbsysError):
    """Objects with incompatible dimensions were combined."""

    code = "ShapeMismatch"


class DomainMismatch(LimbsysError):
    """A weighted point lacks an assignment under a partial map."""

    code = "DomainMismatch"


class NotAForest(LimbsysError):
    """The support graph contains a cycle; ``witness_cycle`` exhibits one."""

    code = "NotAForest"

    def __init__(self, message: str, witness_cycle=None):
        super().__init__(message)
        self.witness_cycle = witness_cycle


class Infeasible(LimbsysError):
    """The backward recursion produced a negative mass: no nonnegative
    coupling vanishes outside the given limb system."""

    code = "Infeasible"

    def __init__(self, message: str, stage=None, site=None, deficit=None):
        super().__init__(message)
        self.stage = stage
        self.site = site
        self.deficit = deficit


class TooLarge(LimbsysError):
    """Instance exceeds the size bound of a brute-force routine."""

    code = "TooLarge"
