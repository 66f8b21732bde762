"""Package-wide error types."""


class NumericalFailure(RuntimeError):
    """A solver could not produce a usable answer (infeasible, unbounded,
    or out of iterations). Carries enough context to report which input
    failed."""

    def __init__(self, message: str, sample_index: int | None = None):
        super().__init__(message)
        self.sample_index = sample_index
