"""Exception hierarchy shared by all numerical modules."""


class ShearPumpError(Exception):
    """Base class for every error raised by this package."""


class ModelError(ShearPumpError, ValueError):
    """Invalid model parameters (even ring size, negative squared side, ...)."""


class NotHermitianError(ShearPumpError, ValueError):
    pass


class SplitDegeneracyError(ShearPumpError):
    """A band index set cuts through a cluster of (nearly) degenerate levels."""


class DegenerateDenominatorError(ShearPumpError):
    pass


class StepInstabilityError(ShearPumpError):
    """Finite-difference derivative does not behave as the step is halved."""


class RefineLoopError(ShearPumpError):
    """Consecutive loop samples are too far apart to transport a real frame."""


class LoopNotClosedError(ShearPumpError, ValueError):
    pass


class GapClosureError(ShearPumpError):
    """A gap that must stay open closes on the sampling grid."""


class QuantizationError(ShearPumpError):
    """A plaquette sum failed to settle on an integer."""


class CrossingError(ShearPumpError):
    """Effective crossing coefficients are singular or inapplicable."""


class UnitarityError(ShearPumpError):
    pass


class ConvergenceError(ShearPumpError):
    pass


class ConfigError(ShearPumpError, ValueError):
    pass
