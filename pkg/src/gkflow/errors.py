"""Exception types shared across the package."""


class GkflowError(Exception):
    """Base class for all package errors."""


class TwoConvexityViolated(GkflowError):
    """Spectrum left the admissible cone lambda_1 + lambda_2 > 2*kappa."""


class DegenerateEigenbasis(GkflowError):
    """Eigenbasis could not be resolved for a shape operator."""


class DegenerateProfile(GkflowError):
    """Profile curve violates its invariants (r <= 0 interior, bad spacing, too few points)."""


class ApexOutside(GkflowError):
    """Pseudo-cone apex is not enclosed by the hypersurface."""


class NeckTooShort(GkflowError):
    """Detected neck cannot accommodate both surgery bends in its middle third."""


class MonotonicityViolated(GkflowError):
    """Surgery verdicts failed: chosen parameters violate the monotone-surgery regime."""


class NoNeckAtThreshold(GkflowError):
    """Curvature threshold was hit but no neck candidate was found."""


class InsufficientHistory(GkflowError):
    """Operation needs more accepted steps than the state carries."""


class ConfigError(GkflowError):
    """Run configuration failed to parse or validate."""
