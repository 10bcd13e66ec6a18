"""
Suite Module
Campanha de verificacao: cada propriedade vira um CheckResult com valor medido,
limite e flag. Falhas sao resultados, nunca excecoes. Checagens de igualdade
trazem um controle negativo '<nome>:negative_control' cujo passed significa
'corrupcao detectada'.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from src.batch.sweep import SweepEntry, SweepResult, run_epsilon_sweep, solve_family
from src.core.cone import (
    HermitianNode,
    PotentialPath,
    block_determinant_defect,
    build_hermitian,
    cone_identity_check,
    ma_residual,
)
from src.core.config import SolverConfig, thread_limit
from src.core.errors import SasakiError
from src.core.functionals import (
    geodesic_length,
    i_functional,
    k_energy,
    k_energy_hessian_check,
    s_bar,
)
from src.core.generators import constant_field, cosine_field, random_bandlimited
from src.core.geometry import SpatialField, TransverseModel, integrate, transverse_scalar_curvature
from src.core.logger import timed
from src.core.solver import (
    SolveReport,
    build_subsolution,
    check_uniqueness as solution_gap,
    homogeneous_solution,
    solve_geodesic,
    solve_supersolution,
)
from src.verify.refinement import refinement_study

logger = logging.getLogger(__name__)

COSINE_AMPLITUDE = 0.05
CORRUPTION_AMPLITUDE = 0.1
SAFETY_FACTOR = 10.0
HOMOGENEOUS_EPS = 0.1
METRIC_SHIFT = 2.0


@dataclass(frozen=True)
class CheckResult:
    """Uma propriedade verificada: value comparado a bound."""
    name: str
    value: float
    bound: float
    passed: bool
    comparison: str = "<="
    context: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "value": _json_float(self.value),
            "bound": _json_float(self.bound),
            "comparison": self.comparison,
            "passed": self.passed,
            "context": self.context,
        }

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.3e} {self.comparison} {self.bound:.3e}"


def _json_float(value: float) -> float | str:
    return value if math.isfinite(value) else str(value)


def at_most(name: str, value: float, bound: float, **context: Any) -> CheckResult:
    return CheckResult(name, float(value), float(bound), bool(value <= bound), "<=", context)


def at_least(name: str, value: float, bound: float, **context: Any) -> CheckResult:
    return CheckResult(name, float(value), float(bound), bool(value >= bound), ">=", context)


def detected(name: str, value: float, bound: float, **context: Any) -> CheckResult:
    """Controle negativo: passa quando a corrupcao excede o limite da checagem."""
    return CheckResult(
        f"{name}:negative_control", float(value), float(bound), bool(value > bound), ">", context
    )


@dataclass(frozen=True)
class SuiteSettings:
    """Tamanhos e parametros por nivel (quick | full)."""
    level: str
    nt: int
    eps: float
    cone_nt: tuple[int, int]
    node_count: int
    drift_eps: tuple[float, ...]
    trend_eps: tuple[float, float]
    richardson: tuple[int, int]
    hessian_levels: tuple[int, int]
    triples: int
    pairs: int
    family: bool
    refinement_levels: tuple[int, ...] | None

    @classmethod
    def for_level(cls, level: str) -> SuiteSettings:
        if level == "quick":
            return cls(
                level="quick", nt=16, eps=1e-2, cone_nt=(64, 128), node_count=10_000,
                drift_eps=(0.1, 0.05, 0.025), trend_eps=(1e-2, 1e-3), richardson=(8, 8),
                hessian_levels=(32, 64), triples=1, pairs=2, family=False,
                refinement_levels=None,
            )
        if level == "full":
            return cls(
                level="full", nt=32, eps=1e-2, cone_nt=(64, 128), node_count=10_000,
                drift_eps=(0.1, 0.05, 0.025), trend_eps=(1e-2, 1e-3), richardson=(16, 16),
                hessian_levels=(32, 64), triples=5, pairs=5, family=True,
                refinement_levels=(8, 16, 32),
            )
        raise ValueError(f"Nivel desconhecido: {level}")

    @property
    def sweep_eps(self) -> dict[str, tuple[float, ...]]:
        """Valores de eps resolvidos uma unica vez por problema padrao."""
        cosine = {*self.drift_eps, self.eps, *self.trend_eps}
        return {
            "cosine": tuple(sorted(cosine, reverse=True)),
            "homogeneous": tuple(sorted({HOMOGENEOUS_EPS, self.eps}, reverse=True)),
        }


class SuiteContext:
    """Modelo, configuracao e solves compartilhados entre checagens.

    Cada problema padrao e resolvido por uma varredura em eps com warm start;
    as checagens leem as entradas dessa varredura em vez de refazer solves.
    """

    def __init__(
        self,
        settings: SuiteSettings,
        model: TransverseModel,
        cfg: SolverConfig,
        seeds: tuple[float, ...] = (1.0, 4.0),
    ) -> None:
        self.settings = settings
        self.seeds = seeds
        self.model = model
        self.cfg = replace(cfg, m_init=seeds[0]).continuation_to(settings.eps, settings.eps)
        self.cosine = (constant_field(model, 0.0), cosine_field(model, COSINE_AMPLITUDE))
        self.homogeneous = (constant_field(model, 0.0), constant_field(model, 1.0))
        self._sweeps: dict[str, SweepResult] = {}
        self._distances: dict[tuple[str, str], float] = {}

    def prepare(self) -> None:
        """Resolve os problemas padrao antes de despachar as checagens."""
        for key in ("homogeneous", "cosine"):
            self.sweep(key)

    def sweep(self, key: str) -> SweepResult:
        if key not in self._sweeps:
            phi0, phi1 = getattr(self, key)
            self._sweeps[key] = run_epsilon_sweep(
                phi0, phi1, self.settings.sweep_eps[key], self.cfg, self.model, self.settings.nt
            )
        return self._sweeps[key]

    def entry(self, key: str, eps: float | None = None) -> SweepEntry:
        eps = self.settings.eps if eps is None else eps
        result = self.sweep(key)
        try:
            return result.by_eps(eps)
        except KeyError as exc:
            detail = "; ".join(result.errors) or str(exc)
            raise SasakiError(f"Solve {key} em eps={eps:g} indisponivel: {detail}") from exc

    def solution(self, key: str) -> tuple[PotentialPath, SolveReport]:
        entry = self.entry(key)
        return entry.path, entry.report

    def distance(self, labels: tuple[str, str], fields: dict[str, SpatialField]) -> float:
        if labels not in self._distances:
            path, _ = solve_geodesic(
                fields[labels[0]], fields[labels[1]], self.cfg, self.model, self.settings.nt
            )
            self._distances[labels] = geodesic_length(path, self.model)
        return self._distances[labels]


def random_nodes(n: int, count: int, rng: np.random.Generator) -> HermitianNode:
    """Nos A aleatorios estritamente positivos (h_phi > 0 e Schur > 0)."""
    raw = rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))
    metric = raw @ np.conj(np.swapaxes(raw, -1, -2)) / n + 0.1 * np.eye(n)
    velocity = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    inverse = np.linalg.inv(metric)
    quad = np.einsum("...i,...ij,...j->...", np.conj(velocity), inverse, velocity).real
    phi_tt = 0.5 * quad + rng.uniform(0.1, 2.0, count)
    return build_hermitian(metric, velocity, phi_tt)


def corrupt(path: PotentialPath, model: TransverseModel) -> PotentialPath:
    """Soma 0.1 cos(2 pi x_1) a fatia interior do meio."""
    interior = np.array(path.interior, copy=True)
    interior[interior.shape[0] // 2] += cosine_field(model, CORRUPTION_AMPLITUDE)
    return path.with_interior(interior)


def _max_residual(path: PotentialPath, eps: float, model: TransverseModel) -> float:
    """max|R|; configuracao nao positiva conta como residuo infinito."""
    try:
        return float(np.max(np.abs(ma_residual(path, eps, model))))
    except SasakiError:
        return math.inf


def check_block_determinant(ctx: SuiteContext) -> list[CheckResult]:
    rng = np.random.default_rng(0)
    worst = 0.0
    corrupted = 0.0
    bound = 1e-12
    for n in (1, 2):
        node = random_nodes(n, ctx.settings.node_count, rng)
        worst = max(worst, block_determinant_defect(node))
        uncoupled = np.linalg.det(node.metric).real * 0.5 * node.phi_tt
        direct = node.det_direct
        gap = np.abs(direct - uncoupled) / (1.0 + np.abs(direct))
        corrupted = max(corrupted, float(np.max(gap)))
    return [
        at_most("block_determinant", worst, bound, nodes=ctx.settings.node_count, n=[1, 2]),
        detected("block_determinant", corrupted, bound, corruption="sem acoplamento phi_ti"),
    ]


def check_cone_identity(ctx: SuiteContext) -> list[CheckResult]:
    eps = 0.1
    coarse_nt, fine_nt = ctx.settings.cone_nt
    results = []
    values = []
    for nt in (coarse_nt, fine_nt):
        path = homogeneous_solution(0.0, 1.0, eps, nt, ctx.model.grid_dims)
        values.append(cone_identity_check(path, ctx.model, eps=eps))
    bound = 1e-3
    results.append(at_most(
        "cone_identity", values[0].discrepancy, bound, nt=coarse_nt, eps=eps,
        equation_discrepancy=values[0].equation_discrepancy,
    ))
    ratio = values[0].discrepancy / max(values[1].discrepancy, 1e-300)
    results.append(at_least("cone_identity_order", ratio, 3.5, nt=[coarse_nt, fine_nt]))
    coarse_path = homogeneous_solution(0.0, 1.0, eps, coarse_nt, ctx.model.grid_dims)
    wrong = cone_identity_check(coarse_path, ctx.model, eps=2.0 * eps)
    results.append(detected(
        "cone_identity", float(wrong.equation_discrepancy or 0.0), bound, corruption="eps dobrado"
    ))
    return results


def check_homogeneous(ctx: SuiteContext) -> list[CheckResult]:
    entry = ctx.entry("homogeneous", HOMOGENEOUS_EPS)
    exact = homogeneous_solution(
        0.0, 1.0, HOMOGENEOUS_EPS, entry.path.nt, ctx.model.grid_dims
    )
    error = float(np.max(np.abs(entry.path.slices - exact.slices)))

    cosine_path, _ = ctx.solution("cosine")
    residual = _max_residual(cosine_path, ctx.cfg.eps_min, ctx.model)
    corrupted = _max_residual(corrupt(cosine_path, ctx.model), ctx.cfg.eps_min, ctx.model)
    tol = ctx.cfg.newton_tol
    return [
        at_most("homogeneous_solution", error, 1e-8, nt=entry.path.nt, eps=HOMOGENEOUS_EPS,
                iterations=entry.report.total_iterations),
        at_most("residual", residual, tol, problem="cosine", eps=ctx.cfg.eps_min),
        detected("residual", corrupted, tol, corruption="0.1 cos(2 pi x) na fatia do meio"),
    ]


def _truncation_estimate(
    ctx: SuiteContext, phi0: SpatialField, phi1: SpatialField, coarse: PotentialPath
) -> float:
    """Richardson em t: supersolucao em nt contra 2 nt nas fatias comuns."""
    fine = solve_supersolution(phi0, phi1, 2 * coarse.nt, ctx.model, ctx.cfg)
    return float(np.max(np.abs(coarse.slices - fine.slices[::2])))


def check_sandwich(ctx: SuiteContext) -> list[CheckResult]:
    worst = -math.inf
    tol = 0.0
    for key in ("homogeneous", "cosine"):
        phi0, phi1 = getattr(ctx, key)
        path, _ = ctx.solution(key)
        lower = build_subsolution(phi0, phi1, path.nt, ctx.model, ctx.cfg.m_init)
        upper = solve_supersolution(phi0, phi1, path.nt, ctx.model, ctx.cfg)
        estimate = _truncation_estimate(ctx, phi0, phi1, upper)
        problem_tol = SAFETY_FACTOR * max(estimate, ctx.cfg.newton_tol)
        tol = max(tol, problem_tol)
        violation = max(
            float(np.max(lower.slices - path.slices)),
            float(np.max(path.slices - upper.slices)),
        )
        worst = max(worst, violation - problem_tol)
    return [at_most("sandwich", worst, 0.0, tolerance=tol, eps=ctx.cfg.eps_min)]


def check_slope_bounds(ctx: SuiteContext) -> list[CheckResult]:
    worst = -math.inf
    for key in ("homogeneous", "cosine"):
        path, _ = ctx.solution(key)
        chord = path.end - path.start
        forward = (path.slices[1] - path.slices[0]) / path.dt
        backward = (path.slices[-1] - path.slices[-2]) / path.dt
        worst = max(worst, float(np.max(forward - chord)), float(np.max(chord - backward)))
    return [at_most("slope_bounds", worst, 1e-10)]


def check_uniqueness(ctx: SuiteContext) -> list[CheckResult]:
    """Solucao com warm start da varredura contra solves frios com outros pesos m."""
    phi0, phi1 = ctx.cosine
    reference, _ = ctx.solution("cosine")
    seeds = ctx.seeds[1:] or ctx.seeds
    gap = solution_gap(
        phi0, phi1, ctx.cfg, ctx.model, ctx.settings.nt, seeds=seeds, reference=reference
    )
    return [at_most("uniqueness", gap, 10.0 * ctx.cfg.newton_tol, seeds=list(ctx.seeds))]


def _i_defect(path: PotentialPath, model: TransverseModel, eps: float) -> float:
    values = np.array([i_functional(phi, model) for phi in path.slices])
    second = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / path.dt**2
    target = eps * integrate(np.ones(model.grid_dims), model)
    return float(np.max(np.abs(second - target)) / target)


def _cosine_level(ctx: SuiteContext, grid: int, nt: int) -> tuple[PotentialPath, TransverseModel]:
    """Problema cosseno em grid x grid; reusa o solve do contexto se a grade coincide."""
    if ctx.model.n == 1 and ctx.model.grid_dims == (grid, grid) and ctx.settings.nt == nt:
        return ctx.solution("cosine")[0], ctx.model
    model = TransverseModel.flat(1, (grid, grid))
    path, _ = solve_geodesic(
        constant_field(model, 0.0), cosine_field(model, COSINE_AMPLITUDE), ctx.cfg, model, nt
    )
    return path, model


def check_i_second_derivative(ctx: SuiteContext) -> list[CheckResult]:
    nt0, g0 = ctx.settings.richardson
    eps = ctx.cfg.eps_min
    levels = [_cosine_level(ctx, g0 * factor, nt0 * factor) for factor in (1, 2)]
    defects = [_i_defect(path, model, eps) for path, model in levels]
    fine_path, fine_model = levels[1]
    estimate = abs(defects[0] - defects[1]) / 3.0
    bound = 5.0 * estimate + 1e-6
    corrupted = _i_defect(corrupt(fine_path, fine_model), fine_model, eps)
    return [
        at_most("d2I_eps", defects[1], bound, coarse_defect=defects[0], eps=eps),
        detected("d2I_eps", corrupted, bound, corruption="0.1 cos(2 pi x) na fatia do meio"),
    ]


def check_energy_drift(ctx: SuiteContext) -> list[CheckResult]:
    eps_values = ctx.settings.drift_eps
    fit_eps = max(eps_values)
    constant = ctx.entry("cosine", fit_eps).energy_drift / fit_eps
    worst_ratio = 0.0
    for eps in eps_values:
        if eps != fit_eps and constant > 0.0:
            worst_ratio = max(worst_ratio, ctx.entry("cosine", eps).energy_drift / (constant * eps))
    exact_eps = ctx.settings.sweep_eps["homogeneous"]
    exact_gap = max(
        abs(ctx.entry("homogeneous", eps).energy_drift - 2.0 * eps) for eps in exact_eps
    )
    return [
        at_most("energy_drift", worst_ratio, 1.5, eps=list(eps_values), fit_eps=fit_eps),
        at_most("energy_drift_exact", exact_gap, 1e-8, problem="homogeneous",
                eps=list(exact_eps)),
    ]


def _straight_path(model: TransverseModel, nt: int) -> PotentialPath:
    return PotentialPath.linear(model.zeros(), cosine_field(model, COSINE_AMPLITUDE), nt)


def _hessian_defect(grid: int, holomorphy_weight: float = 0.5) -> float:
    """sup do defeito da hessiana de mu no segmento reto com nt = grid/2."""
    level = TransverseModel.flat(1, (grid, grid))
    path = _straight_path(level, grid // 2)
    return float(np.max(np.abs(
        k_energy_hessian_check(path, level, holomorphy_weight=holomorphy_weight)
    )))


def check_k_energy(ctx: SuiteContext) -> list[CheckResult]:
    path, _ = ctx.solution("cosine")
    model = ctx.model
    sbar = s_bar(model)
    mu = k_energy(path, model, sbar)
    second = (mu[2:] - 2.0 * mu[1:-1] + mu[:-2]) / path.dt**2
    defect = np.abs(k_energy_hessian_check(path, model, sbar))
    eps = ctx.cfg.eps_min
    curvature_room = np.array([
        eps * abs(integrate(transverse_scalar_curvature(phi, model) - sbar, model))
        for phi in path.slices[1:-1]
    ])
    tol = SAFETY_FACTOR * float(defect.max()) + 1e-10
    convexity = float(np.max(-second - curvature_room))

    coarse_grid, fine_grid = ctx.settings.hessian_levels
    hessian = [_hessian_defect(coarse_grid), _hessian_defect(fine_grid)]
    ratio = hessian[0] / max(hessian[1], 1e-300)
    wrong = _hessian_defect(fine_grid, holomorphy_weight=1.0)

    minima = []
    for phi1 in (
        cosine_field(model, COSINE_AMPLITUDE),
        cosine_field(model, 0.02, frequency=2, offset=0.3),
        random_bandlimited(model, 0.3, 2, seed=7),
    ):
        minima.append(float(k_energy(PotentialPath.linear(model.zeros(), phi1, 8), model)[-1]))

    return [
        at_most("k_energy_convexity", convexity, tol, eps=eps),
        at_least("k_energy_hessian", ratio, 3.0, defects=hessian,
                 grids=[coarse_grid, fine_grid]),
        detected("k_energy_hessian", wrong, SAFETY_FACTOR * hessian[1],
                 corruption="peso 1 no termo dbar"),
        at_least("k_energy_minimum", min(minima), -1e-10, values=minima),
    ]


def _metric_fields(model: TransverseModel, count: int) -> dict[str, SpatialField]:
    """Campos nao constantes: b, seu deslocamento c = b + SHIFT e aleatorios r_i."""
    base = cosine_field(model, COSINE_AMPLITUDE)
    fields = {"b": base, "c": base + METRIC_SHIFT}
    for i in range(count):
        fields[f"r{i}"] = random_bandlimited(model, 0.3, 1, seed=100 + i, offset=0.2 * i)
    return fields


def check_metric_axioms(ctx: SuiteContext) -> list[CheckResult]:
    solver_tol = 10.0 * ctx.cfg.newton_tol
    triples, pairs = ctx.settings.triples, ctx.settings.pairs
    fields = _metric_fields(ctx.model, max(triples, pairs) + 1)
    names = list(fields)

    shift = abs(ctx.distance(("b", "c"), fields) - METRIC_SHIFT)
    forward = ctx.distance(("b", "r0"), fields)
    backward = ctx.distance(("r0", "b"), fields)

    slack = math.inf
    for i in range(triples):
        x, y, z = names[i], names[i + 1], names[i + 2]
        gap = (
            ctx.distance((x, y), fields) + ctx.distance((y, z), fields)
            - ctx.distance((x, z), fields)
        )
        slack = min(slack, gap)

    positives = [ctx.distance((names[i], names[i + 1]), fields) for i in range(pairs)]
    return [
        at_most("distance_shift", shift, 1e-3, shift=METRIC_SHIFT),
        at_most("metric_symmetry", abs(forward - backward), 2.0 * solver_tol),
        at_least("metric_triangle", slack, -3.0 * solver_tol, triples=triples),
        at_least("metric_positivity", min(positives), 1e-12, pairs=names[:pairs + 1]),
    ]


def check_c2_trend(ctx: SuiteContext) -> list[CheckResult]:
    coarse_eps, fine_eps = ctx.settings.trend_eps
    coarse = ctx.entry("cosine", coarse_eps).c2_sup
    fine = ctx.entry("cosine", fine_eps).c2_sup
    growth = fine / coarse - 1.0
    return [at_most("c2_trend", growth, 0.1, sup=[coarse, fine], eps=[coarse_eps, fine_eps])]




def check_family_bounds(ctx: SuiteContext) -> list[CheckResult]:
    model = ctx.model
    base = cosine_field(model, 1.0)

    def lower(s: float) -> SpatialField:
        return constant_field(model, 0.0)

    def upper(s: float) -> SpatialField:
        return (0.03 + 0.02 * s) * base

    family = solve_family(lower, upper, (0.0, 0.5, 1.0), ctx.cfg, model, ctx.settings.nt)
    speed = max(float(np.max(np.abs(np.gradient(p.slices, p.dt, axis=0)))) for p in family.paths)
    rate_bound = 1.5 * 2.0 * speed * integrate(np.ones(model.grid_dims), model) + 1e-6
    return [
        at_most("family_bounds", family.max_energy_rate, rate_bound,
                sup_ds=family.sup_ds, sup_dss=family.sup_dss),
    ]


def check_refinement(ctx: SuiteContext) -> list[CheckResult]:
    levels = ctx.settings.refinement_levels
    assert levels is not None
    results = []
    for problem in ("homogeneous", "wavy"):
        table = refinement_study(problem, levels, ctx.cfg)
        results.append(at_least(
            f"refinement_{problem}", table.min_order, 1.7, errors=table.errors, levels=list(levels)
        ))
    return results


Check = Callable[[SuiteContext], list[CheckResult]]

CHECKS: list[tuple[str, Check]] = [
    ("block_determinant", check_block_determinant),
    ("cone_identity", check_cone_identity),
    ("homogeneous_solution", check_homogeneous),
    ("sandwich", check_sandwich),
    ("slope_bounds", check_slope_bounds),
    ("uniqueness", check_uniqueness),
    ("d2I_eps", check_i_second_derivative),
    ("energy_drift", check_energy_drift),
    ("k_energy", check_k_energy),
    ("metric_axioms", check_metric_axioms),
    ("c2_trend", check_c2_trend),
]
FULL_ONLY: list[tuple[str, Check]] = [
    ("family_bounds", check_family_bounds),
    ("refinement", check_refinement),
]


def _run_check(name: str, check: Check, ctx: SuiteContext) -> list[CheckResult]:
    try:
        with timed(logger, f"Checagem {name}"):
            results = check(ctx)
    except Exception as exc:
        logger.exception("Checagem %s falhou com excecao", name)
        return [CheckResult(name, math.nan, math.nan, False, "error", {"error": str(exc)})]
    for result in results:
        logger.info("%s", result)
    return results


def run_suite(
    level: str,
    model: TransverseModel,
    cfg: SolverConfig,
    parallel: bool = False,
    seeds: tuple[float, ...] = (1.0, 4.0),
) -> list[CheckResult]:
    """Executa as checagens do nivel em ordem fixa e devolve todos os resultados."""
    settings = SuiteSettings.for_level(level)
    ctx = SuiteContext(settings, model, cfg, seeds)
    checks = CHECKS + (FULL_ONLY if settings.family else [])
    try:
        ctx.prepare()
    except SasakiError as exc:
        logger.error("Solves compartilhados falharam: %s", exc)

    if parallel:
        workers = min(thread_limit(), len(checks))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(lambda item: _run_check(item[0], item[1], ctx), checks))
    else:
        batches = [_run_check(name, check, ctx) for name, check in checks]

    results = [result for batch in batches for result in batch]
    failed = sum(1 for r in results if not r.passed)
    logger.info("Suite %s: %d checagens, %d falhas", level, len(results), failed)
    return results


# "Confia, mas verifica." - proverbio russo
