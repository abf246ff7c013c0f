"""Exceptions raised by the Moran process toolkit."""


class MoranError(Exception):
    """Base exception for Moran process errors."""


class InvalidGraphError(MoranError):
    """Graph violates a structural requirement (simple, connected, n >= 2)."""


class EdgeListError(InvalidGraphError):
    """Edge-list text could not be turned into a valid graph."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class InvalidParameterError(MoranError):
    """Numeric argument outside its allowed range (epsilon, trials, step caps, counts)."""


class InvalidSubsetError(MoranError):
    """Vertex set is malformed, out of range, or not a proper nonempty subset."""


class UnsupportedFitnessError(MoranError):
    """Fitness value outside the domain of the requested operation."""


class StateSpaceTooLargeError(MoranError):
    """Exact solve requested for a graph above the configured vertex cap."""

    def __init__(self, n: int, cap: int) -> None:
        self.n = n
        self.cap = cap
        super().__init__(
            f"Exact solve needs 2^{n} states but the cap is n <= {cap}; "
            "use the estimator instead"
        )


__all__ = [
    "EdgeListError",
    "InvalidGraphError",
    "InvalidParameterError",
    "InvalidSubsetError",
    "MoranError",
    "StateSpaceTooLargeError",
    "UnsupportedFitnessError",
]
