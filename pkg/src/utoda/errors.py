"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration: bad series/rank pairing, malformed run config, ...

    CLI maps this to exit code 2. ``pointer`` optionally carries a JSON
    pointer to the offending config entry.
    """

    def __init__(self, message: str, pointer: str | None = None):
        self.pointer = pointer
        if pointer is not None:
            message = f"{pointer}: {message}"
        super().__init__(message)


class ContractError(RuntimeError):
    """A documented precondition of an operation was violated by the caller."""


class SingularityError(ArithmeticError):
    """A field denominator crossed zero. Carries the offending grid nodes."""

    def __init__(self, message: str, nodes: list[tuple] | None = None):
        self.nodes = nodes or []
        if self.nodes:
            shown = ", ".join(map(str, self.nodes[:8]))
            more = "" if len(self.nodes) <= 8 else f" (+{len(self.nodes) - 8} more)"
            message = f"{message} at nodes {shown}{more}"
        super().__init__(message)
