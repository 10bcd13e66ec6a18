"""
Refinement Module
Estudo de convergencia sob refinamento simultaneo em t e no espaco.
Ordem observada p = log2(err_h / err_{h/2}).
"""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from src.core.config import SolverConfig
from src.core.errors import ConvergenceError
from src.core.geometry import TransverseModel
from src.core.generators import constant_field, cosine_field
from src.core.solver import homogeneous_solution, solve_geodesic

logger = logging.getLogger(__name__)

MIN_ORDER = 1.7
EXACT_FLOOR = 1e-12
WAVY_AMPLITUDE = 0.05
HOMOGENEOUS_EPS = 0.1


@dataclass
class RefinementTable:
    """Erros por nivel e ordens entre niveis consecutivos."""
    problem: str
    levels: list[int]
    errors: list[float] = field(default_factory=list)
    orders: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p >= MIN_ORDER for p in self.orders)

    @property
    def min_order(self) -> float:
        return min(self.orders) if self.orders else math.inf

    def to_dict(self) -> dict[str, Any]:
        return {
            "problem": self.problem,
            "levels": self.levels,
            "errors": self.errors,
            "orders": [p if math.isfinite(p) else "exact" for p in self.orders],
            "passed": self.passed,
        }


def observed_order(coarse: float, fine: float, floor: float = EXACT_FLOOR) -> float:
    """log2(coarse/fine); erro no nivel do piso conta como exato."""
    if coarse <= floor or fine <= floor:
        return math.inf
    return math.log2(coarse / fine)


def _level_model(n: int, base_grid: Sequence[int], factor: int) -> TransverseModel:
    return TransverseModel.flat(n, tuple(int(d) * factor for d in base_grid))


def refinement_study(
    problem: str,
    levels: Sequence[int],
    cfg: SolverConfig,
    base_grid: Sequence[int] = (8, 8),
    n: int = 1,
) -> RefinementTable:
    """Resolve o problema em cada nivel nt (espaco refinado na mesma razao).

    homogeneous: erro contra a forma fechada em eps=0.1.
    wavy: erro contra o nivel mais fino, amostrado nos nos comuns.
    """
    ordered = sorted(int(lv) for lv in levels)
    if len(ordered) < 2:
        raise ValueError("refinement_study precisa de pelo menos 2 niveis")
    base = ordered[0]
    if any(lv % base or (lv // base) & (lv // base - 1) for lv in ordered):
        raise ValueError(f"Niveis devem ser o primeiro vezes potencias de 2: {ordered}")
    if problem not in ("homogeneous", "wavy"):
        raise ValueError(f"Problema desconhecido: {problem}")

    table = RefinementTable(problem=problem, levels=ordered)
    solutions = []
    for nt in ordered:
        factor = nt // base
        model = _level_model(n, base_grid, factor)
        if problem == "homogeneous":
            level_cfg = cfg.continuation_to(HOMOGENEOUS_EPS)
            phi0, phi1 = constant_field(model, 0.0), constant_field(model, 1.0)
        else:
            level_cfg = cfg
            phi0 = constant_field(model, 0.0)
            phi1 = cosine_field(model, WAVY_AMPLITUDE)
        try:
            path, _ = solve_geodesic(phi0, phi1, level_cfg, model, nt)
        except ConvergenceError as exc:
            raise ConvergenceError(f"Nivel nt={nt} nao convergiu: {exc}", exc.report) from exc
        solutions.append((factor, model, path))
        logger.info("Refinamento %s: nivel nt=%d resolvido", problem, nt)

    if problem == "homogeneous":
        for factor, model, path in solutions:
            exact = homogeneous_solution(0.0, 1.0, HOMOGENEOUS_EPS, path.nt, model.grid_dims)
            table.errors.append(float(np.max(np.abs(path.slices - exact.slices))))
    else:
        top_factor, _, finest = solutions[-1]
        for factor, _, path in solutions[:-1]:
            stride = top_factor // factor
            index = (slice(None, None, stride),) * finest.slices.ndim
            table.errors.append(float(np.max(np.abs(path.slices - finest.slices[index]))))

    floor = max(EXACT_FLOOR, 10.0 * cfg.newton_tol)
    table.orders = [
        observed_order(a, b, floor) for a, b in zip(table.errors[:-1], table.errors[1:])
    ]
    logger.info("Refinamento %s: erros %s, ordens %s", problem, table.errors, table.orders)
    return table


# "Medir e saber." - Lord Kelvin
