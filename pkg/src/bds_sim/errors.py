"""Exception hierarchy shared by every module of the package."""


class BdsError(Exception):
    """Base class for all errors raised by bds_sim."""


class ModelViolation(BdsError):
    """An intensity model returned a negative or non-finite rate."""


class DominationViolation(BdsError):
    """A rate exceeded the dominating bound declared by its model."""


class EnumerationCapExceeded(BdsError):
    """A level set is larger than the configured enumeration cap."""


class ExplosionError(BdsError):
    """A dominating skeleton grew beyond the record cap.

    The partial skeleton built so far is kept on ``partial`` for diagnosis.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class CorruptedSkeleton(BdsError):
    """A skeleton mark lies above its stored dominating level."""


class StrongOrderViolation(BdsError):
    """Two intensity functionals are not strongly ordered.

    ``counterexample`` holds ``(nu_low, nu_high, event_index, rate_low, rate_high)``.
    """

    def __init__(self, message, counterexample=None):
        super().__init__(message)
        self.counterexample = counterexample


class DominationPreconditionError(BdsError):
    """A path is not strongly dominated by the path it is reconstructed from."""


class UniquenessFailure(BdsError):
    """A frozen swap chain has more than one closed communicating class."""


class SolverError(BdsError):
    """A stationary solve did not reach the requested residual tolerance."""


class ConfigError(BdsError):
    """An experiment configuration failed validation.

    ``pointer`` is the JSON pointer of the offending value.
    """

    def __init__(self, message, pointer=""):
        super().__init__(message)
        self.pointer = pointer
