"""Exception hierarchy shared by all modules."""


class KernelFMError(Exception):
    pass


class InputError(KernelFMError, ValueError):
    """Invalid argument: wrong shape, out-of-range time, bad count."""


class SizeError(InputError):
    """Problem size exceeds a configured cap."""


class UnsupportedError(InputError):
    """Valid input, but a combination the routine refuses to handle."""


class ConfigError(InputError):
    """Malformed or inconsistent experiment configuration."""


class StateError(KernelFMError, RuntimeError):
    """An object violates its own invariants (e.g. non-finite weights)."""


class NumericalError(KernelFMError, ArithmeticError):
    pass


class EvaluationError(NumericalError):
    """A function produced a non-finite or undefined value."""


class NonConvergenceError(NumericalError):
    """ODE integration exceeded its step budget.

    ``trajectory`` holds what was computed before giving up and
    ``indices`` lists the failing starts for batched runs.
    """

    def __init__(self, message, trajectory=None, indices=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.indices = list(indices) if indices is not None else []


class TrainingError(NumericalError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
