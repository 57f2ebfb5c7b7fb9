"""Exception taxonomy shared across the package.

Every domain failure raised by library code derives from HfboundError so the
command line layer can map it to a nonzero exit without pattern matching on
message text.  Pipeline stages attach a machine-readable ``stage`` attribute
where it helps callers report which verification failed.
"""


class HfboundError(Exception):
    """Base class for all domain errors raised by this package."""


class ExprSyntaxError(HfboundError):
    """Malformed map expression.

    Carries the byte offset of the first offending character and a short
    description of what was expected there.
    """

    def __init__(self, message, position):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class NonEntireError(HfboundError):
    """Expression denotes a function that is not entire (e.g. division by a
    subexpression containing the variable)."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)
        self.position = position


class EvalOverflowError(HfboundError):
    """Evaluation escaped the representable floating range.

    Callers iterating orbits treat this as the orbit having escaped.
    """


class SampleEscapeError(HfboundError):
    """An orbit left the sampled region before the requested horizon; the
    sample set is not forward invariant enough for the estimate."""


class GeometryError(HfboundError):
    """Disk-family geometry violates a precondition (overlapping closures,
    nonpositive radii, or a radius ordering violation)."""


class HypothesisViolatedError(HfboundError):
    """Combinatorial preconditions of the mutual-partner search are not met."""


class LiftFailureError(HfboundError):
    """Boundary continuation stalled (typically a critical value lies on or
    near the traced curve).  Callers may jitter the radius and retry."""


class NearSingularError(HfboundError):
    """Winding computation rejected: the path passes too close to the base
    point or the angular defect after refinement is too large."""


class DegreeMismatchError(HfboundError):
    """Independent degree computations disagree.  Hard abort: a certificate
    must never be emitted past this point."""


class NotCompactlyContainedError(HfboundError):
    """Traced component is not compactly contained where required."""


class ContractionViolationError(HfboundError):
    """An inverse branch failed its contraction or round-trip residual check."""


class DisjointnessViolationError(HfboundError):
    """Island closures that must be pairwise separated overlap."""


class ScanExhaustedError(HfboundError):
    """A family scan ran out of members (or budget) without reaching the
    requested property."""


class ZeroDeficientError(HfboundError):
    """The zero search exhausted its radius budget below the requested
    count; callers fall through to the islands route."""


class StageFailureError(HfboundError):
    """A certification pipeline failed at a named stage.

    ``stage`` identifies the failing step; ``cause`` keeps the underlying
    error for reporting.  No certificate exists when this is raised.
    """

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class CacheCorruptError(HfboundError):
    """A cache entry failed integrity checks (reported after eviction)."""
