"""Exception hierarchy shared by all modules."""


class ClickfieldError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ClickfieldError, ValueError):
    """Input violates a documented precondition.

    ``messages`` keeps every problem found, not just the first one.
    """

    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class NormalizationError(ValidationError):
    """A mode function does not have unit norm."""


class OrthonormalityError(ValidationError):
    """A family of mode functions is not orthonormal.

    ``pairs`` lists ``(j, k, inner_product)`` for each offending pair.
    """

    def __init__(self, pairs):
        self.pairs = list(pairs)
        msgs = [
            f"modes ({j}, {k}) have inner product {ip:.6g} (expected {1.0 if j == k else 0.0})"
            for j, k, ip in self.pairs
        ]
        super().__init__(msgs)


class ShapeError(ClickfieldError, ValueError):
    """Array dimensions do not match the grid they are used with."""


class InconclusiveRunError(ClickfieldError, RuntimeError):
    """A run produced too few clicks to estimate anything."""

    def __init__(self, total_clicks, required, hint="increase T or decrease C"):
        self.total_clicks = total_clicks
        self.required = required
        super().__init__(
            f"inconclusive run: {total_clicks} clicks recorded, at least {required} needed; {hint}"
        )
