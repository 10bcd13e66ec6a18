"""
Errors Module
Hierarquia de excecoes do solver de geodesicas.
Cada falha esperada tem um tipo proprio para que o CLI possa mapear codigos de saida.
"""
from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from src.core.solver import SolveReport


class SasakiError(Exception):
    """Base de todas as excecoes do pacote."""


class GridMismatchError(SasakiError, ValueError):
    """Campo e modelo definidos em grades diferentes."""


class AdmissibilityError(SasakiError):
    """Metrica transversa ou matriz A nao positiva em algum no."""

    def __init__(self, message: str, min_value: float | None = None) -> None:
        super().__init__(message)
        self.min_value = min_value


class LinearSolveError(SasakiError):
    """Falha na fatoracao ou solucao do sistema linear esparso."""


class ConvergenceError(SasakiError):
    """Newton nao convergiu: piso da busca linear ou limite de iteracoes."""

    def __init__(self, message: str, report: SolveReport | None = None) -> None:
        super().__init__(message)
        self.report = report


class ConfigError(SasakiError, ValueError):
    """Configuracao invalida; carrega o caminho do campo (ex: 'boundary.amplitude')."""

    def __init__(self, field_path: str, message: str) -> None:
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path
        self.detail = message

    def to_dict(self) -> dict[str, Any]:
        return {"field": self.field_path, "message": self.detail}


class DumpFormatError(SasakiError, ValueError):
    """Arquivo de dump com cabecalho invalido ou payload truncado."""


# "Errar e humano; persistir no erro e diabolico." - Seneca
