"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A parameter violates an operation's precondition."""


class InvalidState(RuntimeError):
    """An operation was applied to an object in the wrong state (e.g. a swallowed point)."""


class OutOfRange(InvalidArgument):
    """A time or index lies beyond the horizon of a stored object."""


class NumericalFailure(RuntimeError):
    """The discretisation broke an invariant it cannot repair."""


class NoSuchBTLS(InvalidArgument):
    """No two-valued local set exists for the requested values."""

    def __init__(self, a: float, b: float, threshold: float):
        self.a = a
        self.b = b
        self.threshold = threshold
        super().__init__(
            f"a+b >= 2*lambda required: got a={a:.6g}, b={b:.6g}, "
            f"a+b={a + b:.6g} < {threshold:.6g}"
        )
