"""
Generators Module
Geradores embutidos de dados de fronteira (constants, cosine, random, file)
e do lado direito f. Todos devolvem campos na grade do modelo.
"""
from __future__ import annotations

import itertools
import logging
from pathlib import Path

import numpy as np

from src.core.config import BoundarySpec, ModelSpec, RhsSpec
from src.core.errors import ConfigError, GridMismatchError
from src.core.geometry import FloatArray, SpatialField, TransverseModel

logger = logging.getLogger(__name__)


def build_model(spec: ModelSpec) -> TransverseModel:
    return TransverseModel.flat(spec.n, spec.grid)


def constant_field(model: TransverseModel, value: float) -> SpatialField:
    return np.full(model.grid_dims, float(value))


def cosine_field(
    model: TransverseModel, amplitude: float, frequency: int = 1, offset: float = 0.0
) -> SpatialField:
    """offset + a cos(2 pi k x_1); admissivel sse |a| pi^2 k^2 < 1."""
    x1 = model.coordinate(0)
    return offset + amplitude * np.cos(2.0 * np.pi * frequency * x1)


def random_bandlimited(
    model: TransverseModel, amplitude: float, modes: int, seed: int, offset: float = 0.0
) -> SpatialField:
    """Soma de modos de Fourier |k|_inf <= modes com coeficientes semeados.

    Normalizado para sum |c_k| pi^2 |k|^2 = amplitude < 1, o que limita a
    norma espectral de (1/2) phi_{i jbar} por amplitude/2 < h = 1/2.
    """
    rng = np.random.default_rng(seed)
    coords = model.coordinates()
    field = np.zeros(model.grid_dims)
    weight = 0.0
    for wave in itertools.product(range(-modes, modes + 1), repeat=model.real_dim):
        if all(k == 0 for k in wave) or next(k for k in wave if k != 0) < 0:
            continue
        a, b = rng.standard_normal(2)
        phase = 2.0 * np.pi * sum(k * x for k, x in zip(wave, coords))
        field += a * np.cos(phase) + b * np.sin(phase)
        weight += (abs(a) + abs(b)) * np.pi**2 * sum(k * k for k in wave)
    return offset + amplitude * field / weight


def load_field(
    path: str | Path, model: TransverseModel, key: str = "boundary.phi0_file"
) -> SpatialField:
    """Carrega um campo .npy e confere a grade; key e o campo reportado em erros."""
    try:
        values = np.load(Path(path), allow_pickle=False)
    except FileNotFoundError as exc:
        raise ConfigError(key, f"arquivo nao encontrado: {path}") from exc
    values = np.asarray(values, dtype=np.float64)
    if values.shape != model.grid_dims:
        raise GridMismatchError(f"Campo {path} com forma {values.shape}, grade {model.grid_dims}")
    return values


def boundary_fields(
    spec: BoundarySpec, model: TransverseModel
) -> tuple[SpatialField, SpatialField]:
    """(phi0, phi1) para o gerador configurado."""
    if spec.kind == "constants":
        return constant_field(model, spec.phi0), constant_field(model, spec.phi1)
    if spec.kind == "cosine":
        return (
            constant_field(model, spec.phi0),
            cosine_field(model, spec.amplitude, spec.frequency, spec.phi1),
        )
    if spec.kind == "random":
        return (
            random_bandlimited(model, spec.amplitude, spec.modes, spec.seed, spec.phi0),
            random_bandlimited(model, spec.amplitude, spec.modes, spec.seed + 1, spec.phi1),
        )
    assert spec.phi0_file is not None and spec.phi1_file is not None
    return (
        load_field(spec.phi0_file, model, "boundary.phi0_file"),
        load_field(spec.phi1_file, model, "boundary.phi1_file"),
    )


def rhs_field(spec: RhsSpec, model: TransverseModel) -> FloatArray:
    """f = value (1 + a cos(2 pi k x_1)) > 0."""
    if spec.kind == "constant":
        return constant_field(model, spec.value)
    return spec.value * (1.0 + cosine_field(model, spec.amplitude, spec.frequency))


# "Do nada, nada vem." - Lucrecio
