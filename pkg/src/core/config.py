"""
Config Module
Configuracoes imutaveis do solver e das execucoes do CLI.
Carrega JSON, rejeita chaves desconhecidas, aplica overrides de flags
e valida tudo antes de qualquer calculo.
"""
from __future__ import annotations

import json
import logging
import math
import os
from collections.abc import Mapping
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from src.core.errors import ConfigError

logger = logging.getLogger(__name__)

COMMANDS = ("solve", "distance", "verify", "identity-check", "refine")
LINEAR_SOLVERS = ("direct", "gmres")
CONTINUATIONS = ("epsilon", "rhs")
BOUNDARY_KINDS = ("constants", "cosine", "random", "file")
RHS_KINDS = ("constant", "cosine")
LEVELS = ("quick", "full")
PROBLEMS = ("homogeneous", "wavy")
THREADS_ENV = "SASAKI_THREADS"
BLAS_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


@dataclass(frozen=True)
class SolverConfig:
    """Parametros do Newton amortecido e da continuacao."""
    eps_start: float = 1.0
    eps_min: float = 1e-3
    eps_factor: float = 0.5
    newton_tol: float = 1e-9
    max_newton: int = 50
    backtrack: float = 0.5
    min_step: float = 1e-6
    m_init: float = 1.0
    m_cap_factor: float = 2.0**20
    linear_solver: str = "direct"
    gmres_tol: float = 1e-12
    continuation: str = "epsilon"
    rhs_steps: int = 8

    def __post_init__(self) -> None:
        if not self.eps_min > 0.0:
            raise ConfigError("eps_min", f"deve ser > 0, recebido {self.eps_min}")
        if not self.eps_start >= self.eps_min:
            raise ConfigError("eps_start", f"deve ser >= eps_min ({self.eps_min})")
        if not 0.0 < self.eps_factor < 1.0:
            raise ConfigError("eps_factor", "deve estar em (0, 1)")
        if not self.newton_tol > 0.0:
            raise ConfigError("newton_tol", "deve ser > 0")
        if self.max_newton < 1:
            raise ConfigError("max_newton", "deve ser >= 1")
        if not 0.0 < self.backtrack < 1.0:
            raise ConfigError("backtrack", "deve estar em (0, 1)")
        if not 0.0 < self.min_step <= 1.0:
            raise ConfigError("min_step", "deve estar em (0, 1]")
        if not self.m_init > 0.0:
            raise ConfigError("m_init", "deve ser > 0")
        if not self.m_cap_factor >= 1.0:
            raise ConfigError("m_cap_factor", "deve ser >= 1")
        if self.linear_solver not in LINEAR_SOLVERS:
            raise ConfigError("linear_solver", f"esperado um de {LINEAR_SOLVERS}")
        if not self.gmres_tol > 0.0:
            raise ConfigError("gmres_tol", "deve ser > 0")
        if self.continuation not in CONTINUATIONS:
            raise ConfigError("continuation", f"esperado um de {CONTINUATIONS}")
        if self.rhs_steps < 1:
            raise ConfigError("rhs_steps", "deve ser >= 1")

    def eps_schedule(self) -> list[float]:
        """eps_start, eps_start*factor, ... encerrando exatamente em eps_min."""
        schedule = []
        eps = self.eps_start
        while eps > self.eps_min * (1.0 + 1e-12):
            schedule.append(eps)
            eps *= self.eps_factor
        schedule.append(self.eps_min)
        return schedule

    def rhs_schedule(self) -> list[float]:
        """s = 1 - 2^-k para k = 1..rhs_steps, seguido de s = 1."""
        return [1.0 - 2.0**-k for k in range(1, self.rhs_steps + 1)] + [1.0]

    def continuation_to(self, eps_min: float, eps_start: float | None = None) -> SolverConfig:
        """Copia com novo alvo eps_min; eps_start (padrao: o atual) nunca abaixo do alvo.

        Com eps_start = eps_min o solve tem um unico estagio.
        """
        start = self.eps_start if eps_start is None else eps_start
        return replace(self, eps_min=eps_min, eps_start=max(start, eps_min))


@dataclass(frozen=True)
class ModelSpec:
    n: int = 1
    grid: tuple[int, ...] = (16, 16)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError("n", "deve ser >= 1")
        if len(self.grid) != 2 * self.n:
            raise ConfigError("grid", f"esperados {2 * self.n} eixos, recebidos {len(self.grid)}")
        if any(d < 3 for d in self.grid):
            raise ConfigError("grid", f"cada eixo precisa de >= 3 nos: {list(self.grid)}")


@dataclass(frozen=True)
class BoundarySpec:
    """Dados de fronteira phi0, phi1 (geradores embutidos ou arquivos .npy)."""
    kind: str = "constants"
    phi0: float = 0.0
    phi1: float = 0.0
    amplitude: float = 0.05
    frequency: int = 1
    modes: int = 2
    seed: int = 0
    phi0_file: str | None = None
    phi1_file: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in BOUNDARY_KINDS:
            raise ConfigError("boundary.kind", f"esperado um de {BOUNDARY_KINDS}")
        if self.frequency < 1:
            raise ConfigError("boundary.frequency", "deve ser >= 1")
        if self.modes < 1:
            raise ConfigError("boundary.modes", "deve ser >= 1")
        if self.kind == "cosine" and abs(self.amplitude) * math.pi**2 * self.frequency**2 >= 1.0:
            raise ConfigError(
                "boundary.amplitude",
                "|a| pi^2 k^2 >= 1 torna h_phi nao positiva (metrica inadmissivel)",
            )
        if self.kind == "random" and not 0.0 < self.amplitude < 1.0:
            raise ConfigError("boundary.amplitude", "deve estar em (0, 1) para o gerador aleatorio")
        if self.kind == "file":
            for name in ("phi0_file", "phi1_file"):
                if getattr(self, name) is None:
                    raise ConfigError(f"boundary.{name}", "kind=file exige phi0_file e phi1_file")


@dataclass(frozen=True)
class RhsSpec:
    """f = value * (1 + amplitude cos(2 pi k x_1)), positiva."""
    kind: str = "constant"
    value: float = 1.0
    amplitude: float = 0.0
    frequency: int = 1

    def __post_init__(self) -> None:
        if self.kind not in RHS_KINDS:
            raise ConfigError("rhs.kind", f"esperado um de {RHS_KINDS}")
        if not self.value > 0.0:
            raise ConfigError("rhs.value", "deve ser > 0")
        if not abs(self.amplitude) < 1.0:
            raise ConfigError("rhs.amplitude", "|amplitude| deve ser < 1 para f > 0")
        if self.frequency < 1:
            raise ConfigError("rhs.frequency", "deve ser >= 1")


@dataclass(frozen=True)
class RunConfig:
    """Configuracao completa de uma execucao do CLI."""
    command: str
    nt: int = 32
    model: ModelSpec = field(default_factory=ModelSpec)
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    rhs: RhsSpec = field(default_factory=RhsSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: Path = Path("output")
    level: str = "quick"
    parallel: bool = False
    seeds: tuple[float, ...] = (1.0, 4.0)
    levels: tuple[int, ...] = (16, 32, 64)
    problem: str = "homogeneous"

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError("command", f"esperado um de {COMMANDS}")
        if self.nt < 2:
            raise ConfigError("nt", "deve ser >= 2")
        if self.level not in LEVELS:
            raise ConfigError("level", f"esperado um de {LEVELS}")
        if self.problem not in PROBLEMS:
            raise ConfigError("problem", f"esperado um de {PROBLEMS}")
        if not self.seeds or any(s <= 0.0 for s in self.seeds):
            raise ConfigError("seeds", "lista nao vazia de pesos m > 0")
        if len(self.levels) < 2 or any(lv < 2 for lv in self.levels):
            raise ConfigError("levels", "pelo menos 2 niveis com nt >= 2")


_SOLVER_KEYS = {f.name for f in fields(SolverConfig)}
_SECTION_TYPES: dict[str, type] = {"boundary": BoundarySpec, "rhs": RhsSpec}
_TOP_KEYS = (
    {"command", "n", "grid", "nt", "output_dir", "level", "parallel", "seeds", "levels", "problem"}
    | _SOLVER_KEYS
    | set(_SECTION_TYPES)
)


def _load_json(path: Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError("config", f"arquivo nao encontrado: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"JSON invalido: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", "o documento deve ser um objeto JSON")
    return data


def _overrides_dict(overrides: Mapping[str, Any] | object | None) -> dict[str, Any]:
    if overrides is None:
        return {}
    items = overrides.items() if isinstance(overrides, Mapping) else vars(overrides).items()
    return {key: value for key, value in items if value is not None and key in _TOP_KEYS}


def _section(name: str, raw: Any) -> Any:
    cls = _SECTION_TYPES[name]
    if not isinstance(raw, dict):
        raise ConfigError(name, "deve ser um objeto JSON")
    allowed = {f.name for f in fields(cls)}
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"{name}.{key}", "chave desconhecida")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(name, str(exc)) from exc


def _coerce(key: str, value: Any, kind: type) -> Any:
    try:
        if kind is bool and isinstance(value, str):
            return value.lower() in ("1", "true", "yes")
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"valor invalido {value!r}") from exc


def _solver_config(data: dict[str, Any]) -> SolverConfig:
    kinds = {f.name: type(f.default) for f in fields(SolverConfig)}
    values = {key: _coerce(key, data[key], kinds[key]) for key in _SOLVER_KEYS if key in data}
    return SolverConfig(**values)


def parse_config(
    path: Path | str | None = None,
    overrides: Mapping[str, Any] | object | None = None,
) -> RunConfig:
    """Monta um RunConfig validado a partir de JSON e/ou flags.

    Prioridade: defaults < arquivo < flags. Chaves desconhecidas no arquivo
    geram ConfigError com o caminho pontuado da chave.
    """
    data: dict[str, Any] = _load_json(Path(path)) if path is not None else {}
    for key in data:
        if key not in _TOP_KEYS:
            raise ConfigError(key, "chave desconhecida")
    for key, value in _overrides_dict(overrides).items():
        if key in _SECTION_TYPES and isinstance(data.get(key), dict) and isinstance(value, dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value

    if "command" not in data:
        raise ConfigError("command", "obrigatorio")

    grid = data.get("grid", [16, 16])
    if not isinstance(grid, (list, tuple)) or not all(isinstance(d, int) for d in grid):
        raise ConfigError("grid", "lista de inteiros esperada")
    if any(d <= 0 for d in grid):
        raise ConfigError("grid", "dimensoes devem ser positivas")
    model = ModelSpec(n=_coerce("n", data.get("n", len(grid) // 2 or 1), int), grid=tuple(grid))

    sections = {name: _section(name, data[name]) for name in _SECTION_TYPES if name in data}
    config = RunConfig(
        command=str(data["command"]),
        nt=_coerce("nt", data.get("nt", 32), int),
        model=model,
        solver=_solver_config(data),
        output_dir=Path(data.get("output_dir", "output")),
        level=str(data.get("level", "quick")),
        parallel=_coerce("parallel", data.get("parallel", False), bool),
        seeds=tuple(_coerce("seeds", s, float) for s in data.get("seeds", (1.0, 4.0))),
        levels=tuple(_coerce("levels", lv, int) for lv in data.get("levels", (16, 32, 64))),
        problem=str(data.get("problem", "homogeneous")),
        **sections,
    )
    logger.debug("Configuracao validada: %s", config)
    return config


def limit_blas_threads() -> None:
    """Exporta SASAKI_THREADS para as variaveis de thread do BLAS.

    So tem efeito se chamado antes do primeiro import de numpy.
    """
    threads = os.environ.get(THREADS_ENV)
    if not threads:
        return
    for var in BLAS_THREAD_VARS:
        os.environ.setdefault(var, threads)


def thread_limit() -> int:
    """Limite de workers: SASAKI_THREADS ou numero de CPUs."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning("%s invalido (%r), usando numero de CPUs", THREADS_ENV, raw)
    return os.cpu_count() or 1


# "Cada coisa em seu lugar e um lugar para cada coisa." - proverbio popular
