"""Exception types raised across the package.

Each error names a specific way a construction can fail, so callers (and the
CLI) can report the stage and the reason without parsing messages.
"""


class ConeKahlerError(Exception):
    """Base class for all package errors."""


# curve geometry
class RepeatedLine(ConeKahlerError):
    pass


class RootCollision(ConeKahlerError):
    pass


class LabelAmbiguity(ConeKahlerError):
    pass


class SectorOverlap(ConeKahlerError):
    pass


# CP^1 metrics
class NewtonDiverged(ConeKahlerError):
    pass


class WindowViolation(ConeKahlerError):
    pass


# flat cone metric
class TooCloseToSingularSet(ConeKahlerError):
    pass


# link spectrum
class DiscretizationUnstable(ConeKahlerError):
    pass


# weighted analysis
class IndicialResonance(ConeKahlerError):
    pass


# Monge-Ampere
class CorrectionDiverged(ConeKahlerError):
    pass


class PositivityLoss(ConeKahlerError):
    pass


class NewtonStall(ConeKahlerError):
    pass


class InsufficientOuterDomain(ConeKahlerError):
    pass


# curvature
class StencilCrossesSingularSet(ConeKahlerError):
    pass


class NonConvergentTail(ConeKahlerError):
    pass


# cli
class ConfigInvalid(ConeKahlerError):
    pass
