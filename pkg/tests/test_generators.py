"""
Testes para o modulo Generators.
Verifica os geradores de fronteira e de f, e a carga de campos .npy.
"""
from pathlib import Path

import numpy as np
import pytest

from src.core.config import BoundarySpec, ModelSpec, RhsSpec
from src.core.errors import ConfigError, GridMismatchError
from src.core.generators import (
    boundary_fields,
    build_model,
    cosine_field,
    load_field,
    random_bandlimited,
    rhs_field,
)
from src.core.geometry import TransverseModel, metric_matrix


@pytest.fixture
def model() -> TransverseModel:
    """Toro plano n=1 em grade 8x8."""
    return build_model(ModelSpec(n=1, grid=(8, 8)))


class TestBoundaryGenerators:
    """Testes dos geradores embutidos."""

    def test_constants(self, model: TransverseModel) -> None:
        """Verifica phi0 = 0 e phi1 = 1."""
        phi0, phi1 = boundary_fields(BoundarySpec(phi1=1.0), model)
        np.testing.assert_array_equal(phi0, 0.0)
        np.testing.assert_array_equal(phi1, 1.0)

    def test_cosine_depends_only_on_x1(self, model: TransverseModel) -> None:
        """Verifica cos(2 pi x_1) com offset."""
        field = cosine_field(model, 0.05, offset=1.0)
        assert field[0, 0] == pytest.approx(1.05)
        np.testing.assert_allclose(field, np.broadcast_to(field[:, :1], field.shape))

    def test_cosine_spec(self, model: TransverseModel) -> None:
        """Verifica phi1 do gerador cosine."""
        _, phi1 = boundary_fields(BoundarySpec(kind="cosine", amplitude=0.05), model)
        np.testing.assert_allclose(phi1, cosine_field(model, 0.05))

    def test_random_is_seeded(self, model: TransverseModel) -> None:
        """Verifica reprodutibilidade pela semente."""
        first = random_bandlimited(model, 0.5, 2, seed=7)
        second = random_bandlimited(model, 0.5, 2, seed=7)
        np.testing.assert_array_equal(first, second)
        assert not np.allclose(first, random_bandlimited(model, 0.5, 2, seed=8))

    def test_random_is_admissible(self, model: TransverseModel) -> None:
        """Verifica h_phi positiva para amplitude < 1."""
        field = random_bandlimited(model, 0.9, 3, seed=11)
        assert metric_matrix(field, model).admissible
        assert abs(field.mean()) < 1e-12

    def test_random_n2(self) -> None:
        """Verifica o gerador em n=2."""
        model = TransverseModel.flat(2, (4, 4, 4, 4))
        field = random_bandlimited(model, 0.5, 1, seed=3)
        assert field.shape == (4, 4, 4, 4)
        assert metric_matrix(field, model).admissible

    def test_file_kind(self, model: TransverseModel, tmp_path: Path) -> None:
        """Verifica carga de .npy na grade."""
        values = np.linspace(0.0, 1.0, 64).reshape(8, 8) * 1e-3
        np.save(tmp_path / "a.npy", values)
        np.save(tmp_path / "b.npy", values + 1.0)
        spec = BoundarySpec(
            kind="file", phi0_file=str(tmp_path / "a.npy"), phi1_file=str(tmp_path / "b.npy")
        )
        phi0, phi1 = boundary_fields(spec, model)
        np.testing.assert_array_equal(phi0, values)
        np.testing.assert_array_equal(phi1, values + 1.0)

    def test_file_wrong_grid(self, model: TransverseModel, tmp_path: Path) -> None:
        """Verifica GridMismatchError para grade diferente."""
        np.save(tmp_path / "small.npy", np.zeros((4, 4)))
        with pytest.raises(GridMismatchError):
            load_field(tmp_path / "small.npy", model)

    def test_file_missing(self, model: TransverseModel, tmp_path: Path) -> None:
        """Verifica ConfigError para arquivo ausente."""
        with pytest.raises(ConfigError):
            load_field(tmp_path / "none.npy", model)

    def test_missing_phi1_file_names_its_field(
        self, model: TransverseModel, tmp_path: Path
    ) -> None:
        """Verifica que phi1_file ausente e reportado em boundary.phi1_file."""
        np.save(tmp_path / "a.npy", np.zeros((8, 8)))
        spec = BoundarySpec(
            kind="file", phi0_file=str(tmp_path / "a.npy"), phi1_file=str(tmp_path / "none.npy")
        )
        with pytest.raises(ConfigError) as info:
            boundary_fields(spec, model)
        assert info.value.field_path == "boundary.phi1_file"


class TestRhs:
    """Testes do lado direito f."""

    def test_constant(self, model: TransverseModel) -> None:
        """Verifica f = value."""
        np.testing.assert_array_equal(rhs_field(RhsSpec(value=2.0), model), 2.0)

    def test_cosine_positive(self, model: TransverseModel) -> None:
        """Verifica f = value (1 + a cos) > 0."""
        f = rhs_field(RhsSpec(kind="cosine", value=1.0, amplitude=0.5), model)
        assert f.min() == pytest.approx(0.5)
        assert f.max() == pytest.approx(1.5)


# "Nada surge do nada." - Parmenides
