"""
Testes para o modulo Solver.
Verifica subsolucao, supersolucao, passo de Newton, continuacao em eps e em f,
e a solucao fechada do caso homogeneo.
"""
import math
from dataclasses import replace

import numpy as np
import pytest

from src.core.cone import PotentialPath, assemble_interior, ma_residual
from src.core.config import SolverConfig
from src.core.errors import AdmissibilityError, ConvergenceError, GridMismatchError
from src.core.geometry import TransverseModel
from src.core.solver import (
    build_subsolution,
    check_uniqueness,
    find_subsolution_weight,
    homogeneous_solution,
    newton_step,
    solve_geodesic,
    solve_supersolution,
    subsolution_path,
)


@pytest.fixture
def model() -> TransverseModel:
    """Toro plano n=1 em grade 8x8."""
    return TransverseModel.flat(1, (8, 8))


@pytest.fixture
def cfg() -> SolverConfig:
    """Continuacao curta ate eps = 0.1."""
    return SolverConfig(eps_start=1.0, eps_min=0.1, newton_tol=1e-10)


@pytest.fixture
def cosine(model: TransverseModel) -> np.ndarray:
    """0.05 cos(2 pi x_1)."""
    return 0.05 * np.cos(2.0 * np.pi * model.coordinate(0))


def _supersolution_zero_data(t: float) -> float:
    """rho(t) desfeito do cone para phi0 = phi1 = 0, n = 1."""
    return 4.0 * math.log(1.0 + t / 2.0) - 4.0 * t * math.log(1.5)


class TestSubsolution:
    """Testes da subsolucao explicita."""

    def test_value_at_midpoint(self) -> None:
        """Verifica phi0(1/2) = 1/2 - 1/4 para 0 -> 1 com m = 1."""
        path = subsolution_path(np.zeros((4, 4)), np.ones((4, 4)), 8, 1.0)
        np.testing.assert_allclose(path.slices[4], 0.25)

    def test_homogeneous_needs_no_doubling(self, model: TransverseModel) -> None:
        """Verifica m = m_init quando a subsolucao ja e positiva."""
        _, m = find_subsolution_weight(model.zeros(), model.zeros() + 1.0, 8, model)
        assert m == 1.0

    def test_weight_doubles_until_positive(
        self, model: TransverseModel, cosine: np.ndarray
    ) -> None:
        """Verifica dobra de m a partir de m_init pequeno."""
        path, m = find_subsolution_weight(model.zeros(), cosine, 8, model, m_init=1e-3)
        assert m > 1e-3
        assert math.log2(m / 1e-3) == pytest.approx(round(math.log2(m / 1e-3)))
        assert assemble_interior(path, model).all_positive

    def test_weight_cap_raises(self, model: TransverseModel, cosine: np.ndarray) -> None:
        """Verifica AdmissibilityError quando o teto de m e atingido."""
        with pytest.raises(AdmissibilityError):
            build_subsolution(model.zeros(), cosine, 8, model, m=1e-6, cap_factor=1.0)


class TestSupersolution:
    """Testes da supersolucao linear no cone."""

    def test_zero_data_closed_form(self, model: TransverseModel) -> None:
        """Verifica rho(1/2) ~ 0.0816 para dados nulos."""
        path = solve_supersolution(model.zeros(), model.zeros(), 32, model)
        assert path.slices[16].mean() == pytest.approx(0.0816, abs=1e-3)
        expected = np.array([_supersolution_zero_data(t) for t in path.times])
        np.testing.assert_allclose(path.slices[:, 0, 0], expected, atol=1e-4)

    def test_boundary_is_respected(self, model: TransverseModel, cosine: np.ndarray) -> None:
        """Verifica Dirichlet exato apos o unlift."""
        path = solve_supersolution(model.zeros(), cosine, 16, model)
        np.testing.assert_allclose(path.start, 0.0, atol=1e-14)
        np.testing.assert_allclose(path.end, cosine, atol=1e-14)

    def test_sandwich_on_homogeneous(self, model: TransverseModel, cfg: SolverConfig) -> None:
        """Verifica subsolucao <= solucao <= supersolucao."""
        phi0, phi1 = model.zeros(), model.zeros() + 1.0
        solution, report = solve_geodesic(phi0, phi1, cfg, model, 16)
        lower = subsolution_path(phi0, phi1, 16, report.m_used)
        upper = solve_supersolution(phi0, phi1, 16, model)
        assert np.all(lower.slices <= solution.slices + 1e-12)
        assert np.all(solution.slices <= upper.slices + 1e-12)


class TestNewton:
    """Testes do passo de Newton."""

    def test_step_is_zero_at_solution(self, model: TransverseModel) -> None:
        """Verifica passo nulo quando o residuo ja esta abaixo da tolerancia."""
        exact = homogeneous_solution(0.0, 1.0, 0.1, 8, model.grid_dims)
        path, stats = newton_step(exact, 0.1, model)
        assert stats.step_length == 0.0
        assert path is exact

    def test_step_reduces_residual(self, model: TransverseModel) -> None:
        """Verifica reducao estrita de max|R| e fronteiras intocadas."""
        start = subsolution_path(model.zeros(), model.zeros() + 1.0, 8, 1.0)
        path, stats = newton_step(start, 1.0, model)
        assert stats.residual_after < stats.residual_before
        assert stats.residual_before == pytest.approx(math.log(2.0))
        np.testing.assert_array_equal(path.start, start.start)
        np.testing.assert_array_equal(path.end, start.end)

    def test_residual_log_two(self, model: TransverseModel) -> None:
        """Verifica R = log 2 para phi_tt = 2 e eps = 1."""
        path = PotentialPath.from_function(lambda t: t * t * np.ones(model.grid_dims), 8)
        np.testing.assert_allclose(ma_residual(path, 1.0, model), math.log(2.0), atol=1e-12)
        np.testing.assert_allclose(ma_residual(path, 2.0, model), 0.0, atol=1e-12)

    def test_gmres_matches_direct(self, model: TransverseModel, cosine: np.ndarray) -> None:
        """Verifica que gmres + spilu produz o mesmo passo que splu."""
        start = subsolution_path(model.zeros(), cosine, 8, 1.0)
        direct, _ = newton_step(start, 0.5, model)
        iterative, _ = newton_step(start, 0.5, model, cfg=SolverConfig(linear_solver="gmres"))
        np.testing.assert_allclose(iterative.slices, direct.slices, atol=1e-8)


class TestSolveGeodesic:
    """Testes do solve completo."""

    def test_homogeneous_closed_form(self, model: TransverseModel, cfg: SolverConfig) -> None:
        """Verifica |phi - (t + 0.05 t(t-1))| <= 1e-8 com eps = 0.1 e nt = 32."""
        path, report = solve_geodesic(model.zeros(), model.zeros() + 1.0, cfg, model, 32)
        exact = homogeneous_solution(0.0, 1.0, 0.1, 32, model.grid_dims)
        assert np.max(np.abs(path.slices - exact.slices)) <= 1e-8
        np.testing.assert_allclose(path.slices[16], 0.4875, atol=1e-9)
        assert report.converged
        assert [stage.eps for stage in report.stages] == cfg.eps_schedule()
        assert report.final.residual <= cfg.newton_tol

    def test_cosine_residual_below_tolerance(
        self, model: TransverseModel, cfg: SolverConfig, cosine: np.ndarray
    ) -> None:
        """Verifica max|R| <= newton_tol e fronteiras exatas."""
        path, report = solve_geodesic(model.zeros(), cosine, cfg, model, 8)
        assert np.max(np.abs(ma_residual(path, cfg.eps_min, model))) <= cfg.newton_tol
        np.testing.assert_array_equal(path.end, cosine)
        assert report.final.min_schur > 0.0

    def test_rhs_continuation_reaches_same_solution(
        self, model: TransverseModel, cfg: SolverConfig, cosine: np.ndarray
    ) -> None:
        """Verifica que a continuacao em f converge para a mesma eps-geodesica."""
        by_eps, _ = solve_geodesic(model.zeros(), cosine, cfg, model, 8)
        rhs_cfg = replace(cfg, continuation="rhs", rhs_steps=4)
        by_rhs, report = solve_geodesic(model.zeros(), cosine, rhs_cfg, model, 8)
        assert [stage.s for stage in report.stages] == [0.5, 0.75, 0.875, 0.9375, 1.0]
        np.testing.assert_allclose(by_rhs.slices, by_eps.slices, atol=1e-8)

    def test_non_constant_rhs(self, model: TransverseModel, cfg: SolverConfig) -> None:
        """Verifica solve com f = 1 + 0.5 cos(2 pi x_1)."""
        f = 1.0 + 0.5 * np.cos(2.0 * np.pi * model.coordinate(0))
        path, _ = solve_geodesic(model.zeros(), model.zeros() + 1.0, cfg, model, 8, f)
        residual = ma_residual(path, cfg.eps_min, model, f)
        assert np.max(np.abs(residual)) <= cfg.newton_tol

    def test_max_newton_exceeded_raises_with_report(
        self, model: TransverseModel, cfg: SolverConfig
    ) -> None:
        """Verifica ConvergenceError carregando o relatorio parcial."""
        tight = replace(cfg, max_newton=1, newton_tol=1e-14)
        with pytest.raises(ConvergenceError) as info:
            solve_geodesic(model.zeros(), model.zeros() + 1.0, tight, model, 8)
        assert info.value.report is not None
        assert not info.value.report.converged

    def test_inadmissible_boundary_raises(self, model: TransverseModel, cfg: SolverConfig) -> None:
        """Verifica rejeicao de phi1 com h_phi nao positiva."""
        rough = 0.5 * np.cos(2.0 * np.pi * model.coordinate(0))
        with pytest.raises(AdmissibilityError):
            solve_geodesic(model.zeros(), rough, cfg, model, 8)

    def test_warm_start_from_initial(
        self, model: TransverseModel, cfg: SolverConfig, cosine: np.ndarray
    ) -> None:
        """Verifica que o warm start na solucao nao precisa de iteracoes."""
        first, _ = solve_geodesic(model.zeros(), cosine, cfg, model, 8)
        again_cfg = cfg.continuation_to(cfg.eps_min, cfg.eps_min)
        second, report = solve_geodesic(model.zeros(), cosine, again_cfg, model, 8, initial=first)
        assert report.total_iterations == 0
        np.testing.assert_array_equal(second.slices, first.slices)

    def test_uniqueness_across_seeds(
        self, model: TransverseModel, cfg: SolverConfig, cosine: np.ndarray
    ) -> None:
        """Verifica que pesos m distintos levam a mesma solucao."""
        gap = check_uniqueness(model.zeros(), cosine, cfg, model, 8, seeds=(1.0, 4.0))
        assert gap <= 10 * cfg.newton_tol

    def test_report_serialization_has_no_wall_time(
        self, model: TransverseModel, cfg: SolverConfig
    ) -> None:
        """Verifica que to_dict omite o tempo de parede."""
        _, report = solve_geodesic(model.zeros(), model.zeros() + 1.0, cfg, model, 8)
        payload = report.to_dict()
        assert "wall_time" not in payload
        assert payload["converged"] is True
        assert len(payload["stages"]) == len(cfg.eps_schedule())

    def test_initial_with_other_nt_raises(
        self, model: TransverseModel, cfg: SolverConfig, cosine: np.ndarray
    ) -> None:
        """Verifica GridMismatchError para chute inicial com outro nt."""
        initial = subsolution_path(model.zeros(), cosine, 10, 1.0)
        with pytest.raises(GridMismatchError):
            solve_geodesic(model.zeros(), cosine, cfg, model, 8, initial=initial)

    def test_initial_with_other_boundary_raises(
        self, model: TransverseModel, cfg: SolverConfig
    ) -> None:
        """Verifica ValueError quando as fatias de fronteira do chute diferem de phi0/phi1."""
        initial = subsolution_path(model.zeros() + 5.0, model.zeros() - 3.0, 8, 1.0)
        with pytest.raises(ValueError, match="fronteira"):
            solve_geodesic(model.zeros(), model.zeros() + 1.0, cfg, model, 8, initial=initial)

    def test_uniqueness_with_reference(
        self, model: TransverseModel, cfg: SolverConfig, cosine: np.ndarray
    ) -> None:
        """Verifica que a referencia conta como uma das solucoes comparadas."""
        reference, _ = solve_geodesic(model.zeros(), cosine, cfg, model, 8)
        gap = check_uniqueness(
            model.zeros(), cosine, cfg, model, 8, seeds=(4.0,), reference=reference
        )
        assert gap <= 10 * cfg.newton_tol
        shifted = reference.with_interior(reference.interior + 1e-3)
        assert check_uniqueness(
            model.zeros(), cosine, cfg, model, 8, seeds=(4.0,), reference=shifted
        ) == pytest.approx(1e-3, rel=1e-3)


class TestRegularization:
    """Testes da dependencia em eps: monotonia, saltos entre estagios e salto direto."""

    def test_homogeneous_monotone_in_eps(self, model: TransverseModel) -> None:
        """Verifica phi_0.05 >= phi_0.1 com sup|phi_0.05 - phi_0.1| = 0.05/8."""
        phi0, phi1 = model.zeros(), model.zeros() + 1.0
        coarse_cfg = SolverConfig(eps_start=1.0, eps_min=0.1, newton_tol=1e-10)
        coarse, _ = solve_geodesic(phi0, phi1, coarse_cfg, model, 16)
        fine, _ = solve_geodesic(phi0, phi1, coarse_cfg.continuation_to(0.05), model, 16)
        difference = fine.slices - coarse.slices
        assert np.all(difference >= -1e-9)
        assert np.max(difference) == pytest.approx(0.05 / 8.0, abs=1e-9)

    def test_cosine_monotone_in_eps(
        self, model: TransverseModel, cfg: SolverConfig, cosine: np.ndarray
    ) -> None:
        """Verifica que diminuir eps so aumenta a solucao no problema cosseno."""
        coarse, _ = solve_geodesic(model.zeros(), cosine, cfg, model, 8)
        fine, _ = solve_geodesic(model.zeros(), cosine, cfg.continuation_to(0.05), model, 8)
        difference = fine.slices - coarse.slices
        assert np.all(difference >= -1e-9)
        assert 0.0 < np.max(difference) <= 0.5 * 0.05

    def test_homogeneous_stage_gaps(self, model: TransverseModel, cfg: SolverConfig) -> None:
        """Verifica gap = |delta eps|/8 entre estagios da continuacao 1 -> 0.1."""
        _, report = solve_geodesic(model.zeros(), model.zeros() + 1.0, cfg, model, 16)
        gaps = [stage.gap for stage in report.stages]
        assert gaps[0] == pytest.approx(0.125, abs=1e-9)
        np.testing.assert_allclose(gaps[1:], [0.0625, 0.03125, 0.015625, 0.003125], atol=1e-9)

    def test_cosine_stage_gaps_scale_with_eps(
        self, model: TransverseModel, cfg: SolverConfig, cosine: np.ndarray
    ) -> None:
        """Verifica gap <= |delta eps|/2 a partir do segundo estagio."""
        _, report = solve_geodesic(model.zeros(), cosine, cfg, model, 8)
        schedule = cfg.eps_schedule()
        for previous, stage in zip(schedule, report.stages[1:]):
            assert 0.0 < stage.gap <= 0.5 * (previous - stage.eps)

    def test_direct_jump_iteration_count(self) -> None:
        """Verifica no maximo 12 iteracoes de Newton num unico estagio eps = 0.01, nt = 32."""
        small = TransverseModel.flat(1, (4, 4))
        direct = SolverConfig(eps_start=1e-2, eps_min=1e-2, newton_tol=1e-10)
        path, report = solve_geodesic(small.zeros(), small.zeros() + 1.0, direct, small, 32)
        assert len(report.stages) == 1
        assert report.total_iterations <= 12
        exact = homogeneous_solution(0.0, 1.0, 1e-2, 32, small.grid_dims)
        np.testing.assert_allclose(path.slices, exact.slices, atol=1e-9)

    def test_gap_is_serialized(self, model: TransverseModel, cfg: SolverConfig) -> None:
        """Verifica o campo gap em cada estagio de to_dict."""
        _, report = solve_geodesic(model.zeros(), model.zeros() + 1.0, cfg, model, 8)
        assert all("gap" in stage for stage in report.to_dict()["stages"])


# "Devagar se vai ao longe." - proverbio popular
