"""
Sweep Module
Execucao em lote de solves: varredura em eps (com warm start) e familias
a um parametro s de eps-geodesicas entre duas curvas de potenciais.
"""
from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from src.core.cone import PotentialPath, assemble_interior
from src.core.config import SolverConfig
from src.core.errors import ConvergenceError, SasakiError
from src.core.functionals import path_energy
from src.core.geometry import FloatArray, SpatialField, TransverseModel, transverse_laplacian
from src.core.solver import SolveReport, solve_geodesic

logger = logging.getLogger(__name__)

Curve = Callable[[float], SpatialField]


@dataclass(frozen=True, eq=False)
class SweepEntry:
    """Um solve da varredura e suas medidas de segunda ordem."""
    eps: float
    path: PotentialPath
    report: SolveReport
    c2_sup: float
    energy_drift: float


@dataclass
class SweepResult:
    """Resultado da varredura: entradas ok e falhas acumuladas."""
    total: int = 0
    processed: int = 0
    failed: int = 0
    errors: list[str] = field(default_factory=list)
    entries: list[SweepEntry] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        if self.total == 0:
            return 0.0
        return (self.processed / self.total) * 100

    def by_eps(self, eps: float) -> SweepEntry:
        for entry in self.entries:
            if np.isclose(entry.eps, eps, rtol=1e-12, atol=0.0):
                return entry
        raise KeyError(f"eps={eps} ausente da varredura")


def c2_sup(path: PotentialPath, model: TransverseModel) -> float:
    """sup nos nos interiores de |phi_tt| + |Delta_T phi|."""
    node = assemble_interior(path, model)
    lap = transverse_laplacian(path.interior, model)
    return float(np.max(np.abs(node.phi_tt) + np.abs(lap)))


def energy_drift(path: PotentialPath, model: TransverseModel) -> float:
    energy = path_energy(path, model)
    return float(np.max(np.abs(energy - energy[0])))


def _warm_solve(
    phi0: SpatialField,
    phi1: SpatialField,
    eps: float,
    previous: PotentialPath | None,
    previous_eps: float,
    cfg: SolverConfig,
    model: TransverseModel,
    nt: int,
    f: SpatialField | None,
) -> tuple[PotentialPath, SolveReport]:
    """Salto direto previous_eps -> eps; se falhar, refaz com a escada eps_factor."""
    if previous is None:
        return solve_geodesic(phi0, phi1, cfg.continuation_to(eps), model, nt, f)
    try:
        return solve_geodesic(
            phi0, phi1, cfg.continuation_to(eps, eps), model, nt, f, initial=previous
        )
    except ConvergenceError as exc:
        logger.warning("Salto direto para eps=%g falhou (%s), usando continuacao", eps, exc)
    ladder = cfg.continuation_to(eps, previous_eps * cfg.eps_factor)
    return solve_geodesic(phi0, phi1, ladder, model, nt, f, initial=previous)


def run_epsilon_sweep(
    phi0: SpatialField,
    phi1: SpatialField,
    eps_values: Sequence[float],
    cfg: SolverConfig,
    model: TransverseModel,
    nt: int,
    f: SpatialField | None = None,
    progress_fn: Callable[[float], None] | None = None,
) -> SweepResult:
    """Resolve para cada eps (ordem decrescente), reaproveitando o ultimo caminho.

    O primeiro eps segue a continuacao de cfg; os seguintes partem da solucao
    anterior com um unico estagio. Falhas de um eps entram em errors e nao
    interrompem o lote.
    """
    ordered = sorted({float(e) for e in eps_values}, reverse=True)
    result = SweepResult(total=len(ordered))
    previous: PotentialPath | None = None
    previous_eps = 0.0

    for idx, eps in enumerate(ordered):
        try:
            logger.info("Varredura [%d/%d]: eps=%g", idx + 1, result.total, eps)
            path, report = _warm_solve(
                phi0, phi1, eps, previous, previous_eps, cfg, model, nt, f
            )
            result.entries.append(SweepEntry(
                eps=eps,
                path=path,
                report=report,
                c2_sup=c2_sup(path, model),
                energy_drift=energy_drift(path, model),
            ))
            result.processed += 1
            previous, previous_eps = path, eps
        except SasakiError as exc:
            message = f"Erro em eps={eps:g}: {exc}"
            result.errors.append(message)
            result.failed += 1
            logger.error(message)

        if progress_fn:
            progress_fn((idx + 1) / result.total)

    logger.info(
        "Varredura concluida: %d ok, %d falhas", result.processed, result.failed
    )
    return result


@dataclass(frozen=True, eq=False)
class FamilyResult:
    """Familia phi(s, t, .) de eps-geodesicas e limites medidos em s e t."""
    s_values: FloatArray
    paths: tuple[PotentialPath, ...]
    sup_ds: float
    sup_dss: float
    max_energy_rate: float


def solve_family(
    curve0: Curve,
    curve1: Curve,
    s_values: Sequence[float],
    cfg: SolverConfig,
    model: TransverseModel,
    nt: int,
    f: SpatialField | None = None,
) -> FamilyResult:
    """eps_min-geodesicas entre curve0(s) e curve1(s) para cada s.

    Mede sup|d phi/ds|, sup d^2 phi/ds^2 (limite superior, diferencas em s)
    e max_s max_t |dE/dt| / eps_min.
    """
    grid = np.asarray(sorted(float(s) for s in s_values))
    if grid.size < 3:
        raise ValueError("Familia precisa de pelo menos 3 valores de s")
    steps = np.diff(grid)
    if not np.allclose(steps, steps[0]):
        raise ValueError("Valores de s devem ser igualmente espacados")

    paths: list[PotentialPath] = []
    previous: PotentialPath | None = None
    for s in grid:
        phi0, phi1 = curve0(float(s)), curve1(float(s))
        start = None
        if previous is not None:
            start = PotentialPath(np.concatenate([phi0[None], previous.interior, phi1[None]]))
            if not assemble_interior(start, model).all_positive:
                start = None
        stage_cfg = cfg if start is None else cfg.continuation_to(cfg.eps_min, cfg.eps_min)
        path, _ = solve_geodesic(phi0, phi1, stage_cfg, model, nt, f, initial=start)
        paths.append(path)
        previous = path

    stack = np.stack([p.slices for p in paths])
    ds = steps[0]
    sup_ds = float(np.max(np.abs(np.gradient(stack, ds, axis=0))))
    second = (stack[2:] - 2.0 * stack[1:-1] + stack[:-2]) / ds**2
    rates = []
    for path in paths:
        energy = path_energy(path, model)
        rates.append(float(np.max(np.abs(np.gradient(energy, path.dt)))))
    result = FamilyResult(
        s_values=grid,
        paths=tuple(paths),
        sup_ds=sup_ds,
        sup_dss=float(second.max()),
        max_energy_rate=max(rates) / cfg.eps_min,
    )
    logger.info(
        "Familia: %d valores de s, sup|phi_s|=%.3e, sup phi_ss=%.3e, max|E_t|/eps=%.3e",
        grid.size, result.sup_ds, result.sup_dss, result.max_energy_rate,
    )
    return result


# "Nenhum homem entra duas vezes no mesmo rio." - Heraclito
