"""Exception types shared across the toolkit.

Every failure mode that callers are expected to catch gets its own class;
plain ValueError is reserved for programming errors (bad arguments, shape
mismatches) that no caller should be handling.
"""


class AxiflowError(Exception):
    """Base class for all domain errors raised by this package."""


class NonPositiveProfile(AxiflowError):
    """An interior profile height is <= 0 where positivity is required."""


class NonConcave(AxiflowError):
    """A second divided difference of u exceeds the concavity tolerance."""


class NonMonotoneCap(AxiflowError):
    """The profile cap being inverted is not strictly monotone up to the
    requested chart width (the width reaches past the profile maximum)."""


class DegenerateChart(AxiflowError):
    """A pole chart has v_yy <= 0 somewhere, so its curvatures are invalid."""


class EmptyOverlap(AxiflowError):
    """Chart and profile share no usable overlap annulus."""


class DegenerateState(AxiflowError):
    """A linearized diffusion coefficient is nonpositive (convexity lost)."""


class ConvexityLost(AxiflowError):
    """A time step produced second differences of the wrong sign beyond
    tolerance."""


class StitchBroken(AxiflowError):
    """The two-chart overlap defect exceeded the run tolerance."""


class TooFewNodes(AxiflowError):
    """The shrinking domain cannot hold the minimum node count."""


class FitFailed(AxiflowError):
    """The extinction fit was given a non-monotone volume tail."""


class NotFound(AxiflowError):
    """No interior mean-value crossing exists (corrupted profile data)."""


class IncompatibleSnapshots(AxiflowError):
    """Two trajectories' snapshot time grids do not align within tolerance."""


class MissingArtifacts(AxiflowError):
    """Expected run artifacts are absent from the output directory."""


class DegenerateInput(AxiflowError):
    """Input volume is below the floor required for rescaling."""


class ConfigError(AxiflowError):
    """A run or sweep configuration failed validation.

    ``field`` carries the offending key so CLI errors can point at it.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"config field '{field}': {message}")
