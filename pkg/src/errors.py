import typing as th


class PortfolioError(Exception):
    """Base class for every failure raised by the toolkit."""


class PriceFileError(PortfolioError):

    def __init__(self, message: str, line: th.Optional[int] = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientData(PortfolioError):
    pass


class DomainError(PortfolioError, ValueError):
    pass


class AlignmentError(PortfolioError):
    pass


class DegenerateAsset(PortfolioError):

    def __init__(self, asset: int, message: th.Optional[str] = None) -> None:
        self.asset = asset
        super().__init__(message or f"asset {asset} has zero standard deviation")


class ShapeError(PortfolioError, ValueError):
    pass


class EncodingError(PortfolioError):
    pass


class EmptyEncoding(EncodingError):
    """Range N = 0: the variable is fixed to zero and consumes no qubits."""


class InfeasibleProblem(PortfolioError):
    pass


class GenerationError(PortfolioError):
    pass


class ResourceLimit(PortfolioError):

    def __init__(self, n_qubits: int, limit: int) -> None:
        self.n_qubits = n_qubits
        self.limit = limit
        super().__init__(f"{n_qubits} qubits exceeds the limit of {limit}")


class ObjectiveError(PortfolioError):

    def __init__(self, params: th.Sequence[float], value: float) -> None:
        self.params = list(params)
        self.value = value
        super().__init__(f"objective returned {value} at params {self.params}")


class DegenerateAllocation(PortfolioError):
    pass


class JoinError(PortfolioError):
    pass
