"""Excepciones del solver.

`ValueError` para entradas inválidas y `RuntimeError` para operaciones que fallan,
igual que en el resto del paquete.
"""

from __future__ import annotations


class SlipError(RuntimeError):
    pass


class DomainError(SlipError, ValueError):
    """Evaluación fuera de C_{<0} (alguna c_i(x) >= 0) o slacks no positivos."""


class DimensionMismatch(SlipError, ValueError):
    pass


class MissingOracle(SlipError):
    pass


class RankDeficient(SlipError):
    pass


class SingularSystem(SlipError):
    pass


class InvalidSchedule(SlipError, ValueError):
    pass


class NeighborhoodViolation(SlipError):
    """El segmento [x, x + γαd] no quedó dentro de N(θ_k) ni tras reducir γ."""

    def __init__(self, message: str, last_gamma: float = 0.0) -> None:
        super().__init__(message)
        self.last_gamma = last_gamma


class InfeasibleStart(SlipError):
    pass


class Phase1Failure(SlipError):
    pass


class LeastSquaresResidualTooLarge(Phase1Failure):
    pass


class IterationLimitExceeded(Phase1Failure):
    pass
