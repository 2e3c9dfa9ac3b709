"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument breaks a documented precondition (shape, range, phase)."""


class NumericalError(ArithmeticError):
    """A computation cannot be carried out reliably in floating point."""


class ProtocolError(RuntimeError):
    """A feedback message arrived that the receiving state machine cannot accept."""


class ProtocolDesyncError(ProtocolError):
    """The BS-side and UE-side predictors diverged; the scheme is broken."""


class DegenerateChannelError(ValueError):
    """The channel estimate carries no direction (all zeros)."""


class ConfigError(ValueError):
    """Invalid experiment configuration.

    ``violations`` lists every problem found, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.violations))
