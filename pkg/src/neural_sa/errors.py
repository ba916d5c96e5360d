"""Exception types shared across the package."""


class NeuralSaError(Exception):
    """Base class for all package errors."""


class InvalidScheduleError(NeuralSaError, ValueError):
    """Temperature schedule parameters are inconsistent (non-positive or tK > t0)."""


class ScheduleRangeError(NeuralSaError, IndexError):
    """Requested a temperature outside the schedule's step range."""


class DegenerateStateError(NeuralSaError, RuntimeError):
    """No feasible action exists at the current state."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"no feasible action at step {step}")


class InfeasibleActionError(NeuralSaError, ValueError):
    """An action was applied whose feasibility mask entry is false."""


class DegenerateMaskError(NeuralSaError, ValueError):
    """Every entry of a softmax mask is false."""


class ShapeError(NeuralSaError, ValueError):
    """Array dimensions do not match the expected layout."""


class ConfigError(NeuralSaError, ValueError):
    """Invalid configuration key or value, or mismatched checkpoint/problem."""


class TrainingDivergenceError(NeuralSaError, RuntimeError):
    """A training loss became non-finite."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class BatchItemError(NeuralSaError, RuntimeError):
    """A per-instance failure inside a batch, tagged with the instance index."""

    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"instance {index}: {cause}")
