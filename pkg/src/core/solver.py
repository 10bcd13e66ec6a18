"""
Solver Module
Newton amortecido com continuacao para a equacao de Monge-Ampere regularizada
em variaveis de tempo: subsolucao explicita como chute inicial, supersolucao
linear para testes de comparacao e verificacao de unicidade.
"""
from __future__ import annotations

import logging
import time
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from src.core.cone import (
    ConeGrid,
    PotentialPath,
    assemble_interior,
    radii_for,
    residual_from_node,
    unlift,
)
from src.core.config import SolverConfig
from src.core.errors import (
    AdmissibilityError,
    ConvergenceError,
    GridMismatchError,
    LinearSolveError,
)
from src.core.geometry import (
    FloatArray,
    SpatialField,
    TransverseModel,
    metric_matrix,
    transverse_laplacian,
)
from src.core.operators import assemble, build_stencils, hermitian_coefficients

logger = logging.getLogger(__name__)

ORDERING = "MMD_AT_PLUS_A"
PIVOT_THRESHOLD = 0.1


@dataclass
class StageReport:
    """Diagnostico de um estagio de continuacao (eps ou s).

    gap = sup|phi ao fim do estagio - phi no inicio dele|; entre estagios
    sucessivos em eps e O(eps) e serve de limite de regressao.
    """
    eps: float
    s: float
    iterations: int
    residual: float
    min_schur: float
    sup_phitt: float
    sup_laplacian: float
    gap: float
    converged: bool


@dataclass
class SolveReport:
    """Relatorio do solve; residuos sempre reavaliados no caminho devolvido."""
    stages: list[StageReport] = field(default_factory=list)
    converged: bool = False
    continuation: str = "epsilon"
    m_used: float = 0.0
    wall_time: float = 0.0

    @property
    def final(self) -> StageReport:
        if not self.stages:
            raise ValueError("Relatorio sem estagios")
        return self.stages[-1]

    @property
    def total_iterations(self) -> int:
        return sum(stage.iterations for stage in self.stages)

    def to_dict(self) -> dict[str, Any]:
        """Serializacao estavel: sem tempo de parede."""
        return {
            "converged": self.converged,
            "continuation": self.continuation,
            "m_used": self.m_used,
            "total_iterations": self.total_iterations,
            "stages": [asdict(stage) for stage in self.stages],
        }


@dataclass(frozen=True)
class StepStats:
    step_length: float
    residual_before: float
    residual_after: float
    backtracks: int


def subsolution_path(
    phi0: SpatialField, phi1: SpatialField, nt: int, m: float
) -> PotentialPath:
    """phi0(t) = (1-t) phi0 + t phi1 + m t(t-1)."""
    return PotentialPath.from_function(
        lambda t: (1.0 - t) * phi0 + t * phi1 + m * t * (t - 1.0), nt
    )


def find_subsolution_weight(
    phi0: SpatialField,
    phi1: SpatialField,
    nt: int,
    model: TransverseModel,
    m_init: float = 1.0,
    cap_factor: float = 2.0**20,
) -> tuple[PotentialPath, float]:
    """Dobra m ate A(phi0) > 0 em todos os nos interiores."""
    if np.shape(phi0) != np.shape(phi1):
        raise ValueError("phi0 e phi1 em grades diferentes")
    model.check_field(phi0)
    m = m_init
    cap = m_init * cap_factor
    while m <= cap:
        path = subsolution_path(phi0, phi1, nt, m)
        if assemble_interior(path, model).all_positive:
            return path, m
        logger.warning("Subsolucao nao positiva com m=%g, dobrando", m)
        m *= 2.0
    raise AdmissibilityError(
        f"Subsolucao nao positiva ate m={cap:g}: dados de fronteira asperos demais para a grade"
    )


def build_subsolution(
    phi0: SpatialField,
    phi1: SpatialField,
    nt: int,
    model: TransverseModel,
    m: float = 1.0,
    cap_factor: float = 2.0**20,
) -> PotentialPath:
    """Subsolucao explicita com o menor m = m * 2^j que a torna admissivel."""
    path, _ = find_subsolution_weight(phi0, phi1, nt, model, m, cap_factor)
    return path


def _factorize_solve(matrix: sp.spmatrix, rhs: FloatArray, cfg: SolverConfig) -> FloatArray:
    """J x = rhs: splu por padrao, gmres + spilu opcional.

    Os estenceis tem estrutura simetrica, entao a ordenacao e por grau minimo
    em A^T + A com pivo preferencialmente diagonal.
    """
    csc = sp.csc_matrix(matrix)
    try:
        if cfg.linear_solver == "gmres":
            ilu = spla.spilu(csc, drop_tol=1e-6, fill_factor=20, permc_spec=ORDERING)
            precond = spla.LinearOperator(csc.shape, ilu.solve)
            solution, info = spla.gmres(csc, rhs, M=precond, rtol=cfg.gmres_tol, atol=0.0,
                                        restart=100, maxiter=200)
            if info != 0:
                raise LinearSolveError(f"gmres nao convergiu (info={info})")
        else:
            lu = spla.splu(csc, permc_spec=ORDERING, diag_pivot_thresh=PIVOT_THRESHOLD)
            solution = lu.solve(rhs)
    except RuntimeError as exc:
        raise LinearSolveError(f"Fatoracao falhou: {exc}") from exc
    if not np.all(np.isfinite(solution)):
        raise LinearSolveError("Solucao linear com valores nao finitos")
    return solution


def solve_supersolution(
    phi0: SpatialField,
    phi1: SpatialField,
    nt: int,
    model: TransverseModel,
    cfg: SolverConfig | None = None,
) -> PotentialPath:
    """Resolve (r^2/4) rho_rr + (1/4) Delta_T rho + n + 1 = 0 no cone e desfaz o lift.

    Dirichlet em r: rho(1) = phi0, rho(3/2) = phi1 + 4 log(3/2). Com d/dr = 2 d/dt,
    (r^2/4) rho_rr = r^2 rho_tt, logo o canto da matriz de coeficientes e 2 r^2.
    """
    cfg = cfg or SolverConfig()
    model.check_field(phi0)
    model.check_field(phi1)
    n = model.n
    stencils = build_stencils(nt, model.grid_dims)
    radii = radii_for(nt)
    interior_r = radii[1:-1].reshape((-1,) + (1,) * model.real_dim)

    weights = np.zeros((nt - 1, *model.grid_dims, n + 1, n + 1), dtype=np.complex128)
    weights[..., :n, :n] = model.h_inverse
    weights[..., n, n] = 2.0 * interior_r**2
    coefficients = hermitian_coefficients(weights)

    boundary = np.zeros((nt + 1, *model.grid_dims))
    boundary[0] = phi0
    boundary[-1] = phi1 + 4.0 * np.log(radii[-1])
    full = assemble(coefficients, stencils, interior_only=False)
    interior = assemble(coefficients, stencils, interior_only=True)
    rhs = -(n + 1.0) * np.ones(stencils.unknowns) - full @ boundary.ravel()

    values = boundary.copy()
    values[1:-1] = _factorize_solve(interior, rhs, cfg).reshape(nt - 1, *model.grid_dims)
    logger.debug("Supersolucao resolvida: %d incognitas", stencils.unknowns)
    return unlift(ConeGrid(radii=radii, values=values))


def _max_abs(values: FloatArray) -> float:
    return float(np.max(np.abs(values)))


def newton_step(
    path: PotentialPath,
    eps: float,
    model: TransverseModel,
    f: FloatArray | None = None,
    cfg: SolverConfig | None = None,
) -> tuple[PotentialPath, StepStats]:
    """Um passo de Newton com busca linear que preserva A > 0 e reduz max|R|.

    O Jacobiano e exato: dR = tr(A^{-1} dA), montado pelos mesmos estenceis
    do residuo. Fatias de fronteira nunca mudam.
    """
    cfg = cfg or SolverConfig()
    rhs_f = np.ones(model.grid_dims) if f is None else f
    node = assemble_interior(path, model)
    residual = residual_from_node(node, eps, rhs_f, model)
    before = _max_abs(residual)
    if before <= cfg.newton_tol:
        return path, StepStats(0.0, before, before, 0)

    stencils = build_stencils(path.nt, path.grid_dims)
    jacobian = assemble(hermitian_coefficients(np.linalg.inv(node.matrix)), stencils)
    delta = _factorize_solve(jacobian, -residual.ravel(), cfg).reshape(path.interior.shape)

    step = 1.0
    backtracks = 0
    while step >= cfg.min_step:
        trial = path.with_interior(path.interior + step * delta)
        trial_node = assemble_interior(trial, model)
        if trial_node.all_positive:
            after = _max_abs(residual_from_node(trial_node, eps, rhs_f, model))
            if after < before:
                logger.debug("Newton: passo %.3g, max|R| %.3e -> %.3e", step, before, after)
                return trial, StepStats(step, before, after, backtracks)
        step *= cfg.backtrack
        backtracks += 1
    logger.warning(
        "Busca linear atingiu o piso (min_step=%g) com max|R|=%.3e", cfg.min_step, before
    )
    raise ConvergenceError(f"Busca linear atingiu o piso com max|R|={before:.3e}")


def _stage_report(
    path: PotentialPath, stage_start: PotentialPath, eps: float, s: float, f: FloatArray,
    model: TransverseModel, iterations: int, tol: float,
) -> StageReport:
    node = assemble_interior(path, model)
    residual = _max_abs(residual_from_node(node, eps, f, model))
    return StageReport(
        eps=eps,
        s=s,
        iterations=iterations,
        residual=residual,
        min_schur=float(node.schur.min()),
        sup_phitt=_max_abs(node.phi_tt),
        sup_laplacian=_max_abs(transverse_laplacian(path.interior, model)),
        gap=_max_abs(path.slices - stage_start.slices),
        converged=residual <= tol,
    )


def _newton_loop(
    path: PotentialPath, eps: float, f: FloatArray, model: TransverseModel, cfg: SolverConfig,
) -> tuple[PotentialPath, int]:
    iterations = 0
    for _ in range(cfg.max_newton):
        path, stats = newton_step(path, eps, model, f, cfg)
        if stats.step_length == 0.0:
            return path, iterations
        iterations += 1
        if stats.residual_after <= cfg.newton_tol:
            return path, iterations
    return path, iterations


def _check_boundary(phi: SpatialField, model: TransverseModel, label: str) -> None:
    metric = metric_matrix(phi, model)
    if not metric.admissible:
        raise AdmissibilityError(
            f"{label}: h_phi nao positiva (menor autovalor {metric.min_eigenvalue:.3e})",
            metric.min_eigenvalue,
        )


def _check_initial(
    initial: PotentialPath,
    phi0: SpatialField,
    phi1: SpatialField,
    model: TransverseModel,
    nt: int,
) -> None:
    """Chute inicial na mesma grade espaco-tempo e com as mesmas fatias de Dirichlet."""
    initial.check_model(model)
    if initial.nt != nt:
        raise GridMismatchError(f"Chute inicial com nt={initial.nt}, pedido nt={nt}")
    if not (np.array_equal(initial.start, phi0) and np.array_equal(initial.end, phi1)):
        raise ValueError("Fatias de fronteira do chute inicial diferem de phi0/phi1")


def _stages(
    cfg: SolverConfig, f: FloatArray, f0: FloatArray | None
) -> list[tuple[float, float, FloatArray]]:
    if cfg.continuation == "rhs":
        assert f0 is not None
        return [(cfg.eps_min, s, s * f + (1.0 - s) * f0) for s in cfg.rhs_schedule()]
    return [(eps, 1.0, f) for eps in cfg.eps_schedule()]


def solve_geodesic(
    phi0: SpatialField,
    phi1: SpatialField,
    cfg: SolverConfig,
    model: TransverseModel,
    nt: int,
    f: SpatialField | None = None,
    initial: PotentialPath | None = None,
) -> tuple[PotentialPath, SolveReport]:
    """eps-geodesica entre phi0 e phi1 por continuacao com warm start.

    Continuacao em eps (eps_start -> eps_min) ou, com continuation='rhs', em
    f_s = s f + (1-s) f0 com f0 escolhido para que a subsolucao resolva s = 0.
    """
    start = time.perf_counter()
    _check_boundary(phi0, model, "phi0")
    _check_boundary(phi1, model, "phi1")
    rhs_f = np.ones(model.grid_dims) if f is None else np.asarray(f, dtype=np.float64)
    report = SolveReport(continuation=cfg.continuation)

    if initial is None:
        path, report.m_used = find_subsolution_weight(
            phi0, phi1, nt, model, cfg.m_init, cfg.m_cap_factor
        )
    else:
        _check_initial(initial, phi0, phi1, model, nt)
        path = initial

    f0 = None
    if cfg.continuation == "rhs":
        node = assemble_interior(path, model)
        f0 = np.linalg.det(node.matrix).real / (0.5 * cfg.eps_min * model.det_h)

    for eps, s, stage_f in _stages(cfg, rhs_f, f0):
        stage_start = path
        try:
            path, iterations = _newton_loop(path, eps, stage_f, model, cfg)
        except (ConvergenceError, AdmissibilityError) as exc:
            report.wall_time = time.perf_counter() - start
            raise ConvergenceError(f"Estagio eps={eps:g} s={s:g} falhou: {exc}", report) from exc
        stage = _stage_report(
            path, stage_start, eps, s, stage_f, model, iterations, cfg.newton_tol
        )
        report.stages.append(stage)
        logger.info(
            "Estagio eps=%g s=%g: %d iteracoes, max|R|=%.3e, gap=%.3e",
            eps, s, iterations, stage.residual, stage.gap,
        )
        if not stage.converged:
            report.wall_time = time.perf_counter() - start
            raise ConvergenceError(
                f"Estagio eps={eps:g} nao convergiu em {cfg.max_newton} iteracoes", report
            )

    report.converged = True
    report.wall_time = time.perf_counter() - start
    return path, report


def check_uniqueness(
    phi0: SpatialField,
    phi1: SpatialField,
    cfg: SolverConfig,
    model: TransverseModel,
    nt: int,
    seeds: Sequence[float],
    f: SpatialField | None = None,
    reference: PotentialPath | None = None,
) -> float:
    """max sup|phi_a - phi_b| entre solucoes iniciadas com pesos m distintos.

    reference, se dada, e uma solucao ja calculada com os mesmos dados e conta
    como uma das solucoes comparadas.
    """
    if not seeds:
        raise ValueError("Nenhuma semente informada")
    solutions = [
        solve_geodesic(phi0, phi1, replace(cfg, m_init=float(m)), model, nt, f)[0].slices
        for m in seeds
    ]
    if reference is not None:
        reference.check_model(model)
        if reference.nt != nt:
            raise GridMismatchError(f"Referencia com nt={reference.nt}, pedido nt={nt}")
        solutions.insert(0, reference.slices)
    worst = 0.0
    for i in range(len(solutions)):
        for j in range(i + 1, len(solutions)):
            worst = max(worst, _max_abs(solutions[i] - solutions[j]))
    logger.info("Unicidade: %d solucoes, discrepancia %.3e", len(solutions), worst)
    return worst


def homogeneous_solution(
    a: float, b: float, eps: float, nt: int, grid_dims: tuple[int, ...]
) -> PotentialPath:
    """Solucao fechada a + t(b-a) + (eps/2) t(t-1), exata tambem no discreto."""
    ones = np.ones(grid_dims)
    return PotentialPath.from_function(
        lambda t: (a + t * (b - a) + 0.5 * eps * t * (t - 1.0)) * ones, nt
    )


# "Devagar se vai ao longe." - proverbio popular
