"""Exception types raised by the solver stack."""


class PreconditionError(ValueError):
    """An operator was called outside the region where it is well defined."""


class NotReadyError(RuntimeError):
    """The server was asked to aggregate before every client reported."""


class DivergenceError(RuntimeError):
    """Solver state became non-finite.

    ``event_index`` is the position in the event schedule at which the
    non-finite value was first observed.
    """

    def __init__(self, event_index: int, message: str | None = None):
        self.event_index = int(event_index)
        super().__init__(message or f"non-finite solver state at event {self.event_index}")
