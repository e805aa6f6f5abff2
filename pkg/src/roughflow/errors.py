class SolverAbort(RuntimeError):
    """A time integration stopped early; ``step`` is the offending step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class CFLViolation(SolverAbort):
    pass


class ConfigError(ValueError):
    """Experiment configuration failed schema or constraint validation."""
