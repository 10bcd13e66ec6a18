"""
Testes para o modulo Cone.
Verifica PotentialPath, a matriz A(phi), o residuo log-det, o levantamento
para o cone e a identidade cone/tempo na solucao homogenea.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.cone import (
    PotentialPath,
    assemble_A,
    assemble_interior,
    block_determinant_defect,
    build_hermitian,
    cone_identity_check,
    lift,
    ma_residual,
    path_acceleration,
    path_velocity,
    unlift,
)
from src.core.errors import AdmissibilityError, GridMismatchError
from src.core.geometry import TransverseModel
from src.core.solver import homogeneous_solution


@pytest.fixture
def model() -> TransverseModel:
    """Toro plano n=1 em grade 6x6."""
    return TransverseModel.flat(1, (6, 6))


@pytest.fixture
def homogeneous(model: TransverseModel) -> PotentialPath:
    """Solucao fechada 0 -> 1 com eps = 0.1 e nt = 16."""
    return homogeneous_solution(0.0, 1.0, 0.1, 16, model.grid_dims)


def _random_node(n: int, count: int, seed: int):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))
    metric = raw @ np.conj(np.swapaxes(raw, -1, -2)) / n + 0.1 * np.eye(n)
    velocity = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    inverse = np.linalg.inv(metric)
    quad = np.einsum("...i,...ij,...j->...", np.conj(velocity), inverse, velocity).real
    return build_hermitian(metric, velocity, 0.5 * quad + rng.uniform(0.1, 2.0, count))


class TestPotentialPath:
    """Testes do container de fatias."""

    def test_needs_three_slices(self) -> None:
        """Verifica rejeicao de caminho com menos de 3 fatias."""
        with pytest.raises(ValueError):
            PotentialPath(np.zeros((2, 4, 4)))

    def test_rejects_non_finite(self) -> None:
        """Verifica rejeicao de NaN."""
        values = np.zeros((3, 4, 4))
        values[1, 0, 0] = np.nan
        with pytest.raises(ValueError):
            PotentialPath(values)

    def test_slices_are_read_only_copy(self) -> None:
        """Verifica copia defensiva e imutabilidade."""
        values = np.zeros((3, 4, 4))
        path = PotentialPath(values)
        values[1] = 5.0
        assert path.slices[1].max() == 0.0
        with pytest.raises(ValueError):
            path.slices[1, 0, 0] = 1.0

    def test_with_interior_keeps_boundary(self, homogeneous: PotentialPath) -> None:
        """Verifica que as fatias de fronteira nao mudam."""
        changed = homogeneous.with_interior(np.zeros_like(homogeneous.interior))
        np.testing.assert_array_equal(changed.start, homogeneous.start)
        np.testing.assert_array_equal(changed.end, homogeneous.end)
        assert changed.interior.max() == 0.0

    def test_geometry_properties(self, homogeneous: PotentialPath) -> None:
        """Verifica nt, dt e tempos."""
        assert homogeneous.nt == 16
        assert homogeneous.dt == pytest.approx(1 / 16)
        assert homogeneous.times[8] == pytest.approx(0.5)
        assert homogeneous.grid_dims == (6, 6)

    def test_check_model_rejects_other_grid(self, homogeneous: PotentialPath) -> None:
        """Verifica GridMismatchError com modelo em outra grade."""
        with pytest.raises(GridMismatchError):
            homogeneous.check_model(TransverseModel.flat(1, (8, 8)))


class TestHermitianMatrix:
    """Testes de A(phi) e do residuo."""

    def test_assemble_a_on_homogeneous(
        self, homogeneous: PotentialPath, model: TransverseModel
    ) -> None:
        """Verifica A = diag(1/2, eps/2) na solucao homogenea."""
        node = assemble_A(homogeneous, 8, model)
        np.testing.assert_allclose(node.matrix[..., 0, 0], 0.5, atol=1e-12)
        np.testing.assert_allclose(node.matrix[..., 1, 1], 0.05, atol=1e-10)
        np.testing.assert_allclose(node.matrix[..., 0, 1], 0.0, atol=1e-12)
        assert node.all_positive

    def test_assemble_a_rejects_boundary_index(
        self, homogeneous: PotentialPath, model: TransverseModel
    ) -> None:
        """Verifica que k precisa ser interior."""
        with pytest.raises(IndexError):
            assemble_A(homogeneous, 0, model)

    def test_residual_vanishes_on_closed_form(
        self, homogeneous: PotentialPath, model: TransverseModel
    ) -> None:
        """Verifica R = 0 na solucao fechada."""
        residual = ma_residual(homogeneous, 0.1, model)
        assert residual.shape == (15, 6, 6)
        np.testing.assert_allclose(residual, 0.0, atol=1e-10)

    def test_residual_requires_positive_eps(
        self, homogeneous: PotentialPath, model: TransverseModel
    ) -> None:
        """Verifica rejeicao de eps <= 0."""
        with pytest.raises(ValueError):
            ma_residual(homogeneous, 0.0, model)

    def test_residual_rejects_non_positive_configuration(self, model: TransverseModel) -> None:
        """Verifica AdmissibilityError quando phi_tt = 0 (Schur nulo)."""
        linear = PotentialPath.linear(model.zeros(), model.zeros() + 1.0, 8)
        with pytest.raises(AdmissibilityError):
            ma_residual(linear, 0.1, model)

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1), n=st.sampled_from([1, 2, 3]))
    def test_block_determinant_identity(self, seed: int, n: int) -> None:
        """Verifica det A = det(h_phi) * Schur em nos aleatorios positivos."""
        node = _random_node(n, 200, seed)
        assert node.all_positive
        assert block_determinant_defect(node) <= 1e-12

    def test_interior_matches_single_slice(
        self, homogeneous: PotentialPath, model: TransverseModel
    ) -> None:
        """Verifica consistencia entre assemble_interior e assemble_A."""
        perturbed = homogeneous.with_interior(
            homogeneous.interior + 1e-3 * np.cos(2 * np.pi * model.coordinate(0))
        )
        full = assemble_interior(perturbed, model)
        single = assemble_A(perturbed, 5, model)
        np.testing.assert_allclose(full.matrix[4], single.matrix)


class TestConeLift:
    """Testes de lift/unlift e da identidade do cone."""

    def test_lift_of_zero_path(self, model: TransverseModel) -> None:
        """Verifica psi(3/2) = 4 log(3/2) para phi = 0."""
        cone = lift(PotentialPath(np.zeros((9, 6, 6))))
        assert cone.radii[0] == pytest.approx(1.0)
        assert cone.radii[-1] == pytest.approx(1.5)
        assert cone.dr == pytest.approx(0.5 / 8)
        np.testing.assert_allclose(cone.values[-1], 1.6218604, atol=1e-7)
        np.testing.assert_allclose(cone.values[0], 0.0)

    def test_unlift_inverts_lift(self, homogeneous: PotentialPath) -> None:
        """Verifica ida e volta dentro do arredondamento."""
        back = unlift(lift(homogeneous))
        np.testing.assert_allclose(back.slices, homogeneous.slices, atol=1e-14)

    def test_identity_on_homogeneous(self, model: TransverseModel) -> None:
        """Verifica discrepancia ~ dr^2/(2 eps r^4) e ordem 2 no refinamento."""
        coarse = cone_identity_check(homogeneous_solution(0.0, 1.0, 0.1, 64, (6, 6)), model)
        fine = cone_identity_check(homogeneous_solution(0.0, 1.0, 0.1, 128, (6, 6)), model)
        expected = (0.5 / 64) ** 2 / (2 * 0.1)
        assert 1e-4 < coarse.discrepancy <= 1e-3
        assert coarse.discrepancy == pytest.approx(expected, rel=0.1)
        assert coarse.discrepancy / fine.discrepancy >= 3.5

    def test_equation_discrepancy_detects_wrong_eps(
        self, homogeneous: PotentialPath, model: TransverseModel
    ) -> None:
        """Verifica que eps dobrado produz desvio da equacao ~ 1/2."""
        right = cone_identity_check(homogeneous, model, eps=0.1)
        wrong = cone_identity_check(homogeneous, model, eps=0.2)
        assert right.equation_discrepancy is not None and right.equation_discrepancy < 1e-2
        assert wrong.equation_discrepancy == pytest.approx(0.5, abs=0.02)

    def test_zero_path_without_positivity(self, model: TransverseModel) -> None:
        """Verifica que para phi = 0 os dois lados sao O(dr^2)."""
        zero = PotentialPath(np.zeros((17, 6, 6)))
        result = cone_identity_check(zero, model, require_positive=False)
        np.testing.assert_allclose(result.rhs, 0.0, atol=1e-12)
        assert np.max(np.abs(result.lhs)) < 1e-2
        with pytest.raises(AdmissibilityError):
            cone_identity_check(zero, model)


class TestTimeDerivatives:
    """Testes das derivadas em t ao longo do caminho."""

    def test_velocity_and_acceleration_exact_on_quadratics(
        self, homogeneous: PotentialPath
    ) -> None:
        """Verifica phi_t = 1 + eps(t - 1/2) e phi_tt = eps em todas as fatias."""
        times = homogeneous.times.reshape(-1, 1, 1)
        np.testing.assert_allclose(
            path_velocity(homogeneous), np.broadcast_to(1.0 + 0.1 * (times - 0.5), (17, 6, 6)),
            atol=1e-10,
        )
        np.testing.assert_allclose(path_acceleration(homogeneous), 0.1, atol=1e-8)

    def test_lift_constant_matches_math(self) -> None:
        """Verifica a constante 4 log(3/2)."""
        assert 4.0 * math.log(1.5) == pytest.approx(1.6218604, abs=1e-7)


# "Tudo o que e solido se desmancha no ar." - Karl Marx
