from .problem import CompiledProblem, PortfolioProblem, compile
