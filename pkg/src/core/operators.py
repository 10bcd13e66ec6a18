"""
Operators Module
Operadores esparsos de diferencas finitas no espaco-tempo: tempo com Dirichlet
(fatias 0 e nt fixas), espaco periodico. Linhas = nos interiores, colunas = todos os nos.

Coordenadas reais indexadas por 0 = t e 1..2n = eixos espaciais.
Os estenceis coincidem exatamente com os de geometry (np.roll), de modo que o
Jacobiano montado aqui e o Jacobiano exato do residuo discreto.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
import numpy.typing as npt
import scipy.sparse as sp

logger = logging.getLogger(__name__)

Pair = tuple[int, int]


def periodic_first(size: int, step: float) -> sp.csr_matrix:
    """Diferenca central periodica (u_{j+1} - u_{j-1}) / 2h."""
    offsets = [-1, 1, size - 1, -(size - 1)]
    values = [-1.0, 1.0, -1.0, 1.0]
    return sp.diags(values, offsets, shape=(size, size), format="csr") / (2.0 * step)


def periodic_second(size: int, step: float) -> sp.csr_matrix:
    """Diferenca segunda periodica (u_{j+1} - 2u_j + u_{j-1}) / h^2."""
    offsets = [0, -1, 1, size - 1, -(size - 1)]
    values = [-2.0, 1.0, 1.0, 1.0, 1.0]
    return sp.diags(values, offsets, shape=(size, size), format="csr") / step**2


def time_operators(nt: int) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """Selecao, primeira e segunda diferenca centrais nas fatias interiores."""
    if nt < 2:
        raise ValueError(f"nt deve ser >= 2, recebido {nt}")
    dt = 1.0 / nt
    rows = nt - 1
    shape = (rows, nt + 1)
    select = sp.diags([1.0], [1], shape=shape, format="csr")
    first = sp.diags([-1.0, 1.0], [0, 2], shape=shape, format="csr") / (2.0 * dt)
    second = sp.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=shape, format="csr") / dt**2
    return select, first, second


def _spatial(dims: tuple[int, ...], factors: dict[int, sp.csr_matrix]) -> sp.csr_matrix:
    out: sp.csr_matrix | None = None
    for axis, size in enumerate(dims):
        mat = factors.get(axis, sp.identity(size, format="csr"))
        out = mat if out is None else sp.kron(out, mat, format="csr")
    assert out is not None
    return out


@dataclass(frozen=True, eq=False)
class StencilSet:
    """Operadores D_{alpha beta} para todos os pares de coordenadas reais."""
    nt: int
    grid_dims: tuple[int, ...]
    full: dict[Pair, sp.csr_matrix]
    interior: dict[Pair, sp.csr_matrix]

    @property
    def spatial_size(self) -> int:
        return int(np.prod(self.grid_dims))

    @property
    def unknowns(self) -> int:
        return (self.nt - 1) * self.spatial_size

    @property
    def pairs(self) -> list[Pair]:
        return list(self.full.keys())


@lru_cache(maxsize=16)
def build_stencils(nt: int, grid_dims: tuple[int, ...]) -> StencilSet:
    """Monta (e memoriza) os operadores para uma grade espaco-tempo."""
    select, t_first, t_second = time_operators(nt)
    spacing = [1.0 / d for d in grid_dims]
    first = [periodic_first(d, h) for d, h in zip(grid_dims, spacing)]
    second = [periodic_second(d, h) for d, h in zip(grid_dims, spacing)]

    full: dict[Pair, sp.csr_matrix] = {}
    coords = range(len(grid_dims) + 1)
    for alpha, beta in combinations_with_replacement(coords, 2):
        if alpha == 0 and beta == 0:
            time_op, factors = t_second, {}
        elif alpha == 0:
            time_op, factors = t_first, {beta - 1: first[beta - 1]}
        elif alpha == beta:
            time_op, factors = select, {alpha - 1: second[alpha - 1]}
        else:
            time_op, factors = select, {alpha - 1: first[alpha - 1], beta - 1: first[beta - 1]}
        full[(alpha, beta)] = sp.kron(time_op, _spatial(grid_dims, factors), format="csr")

    size = int(np.prod(grid_dims))
    interior = {
        pair: op.tocsc()[:, size: nt * size].tocsr() for pair, op in full.items()
    }
    logger.debug("Estenceis montados: nt=%d grade=%s (%d pares)", nt, grid_dims, len(full))
    return StencilSet(nt=nt, grid_dims=tuple(grid_dims), full=full, interior=interior)


def assemble(
    coefficients: dict[Pair, npt.NDArray[np.float64]],
    stencils: StencilSet,
    interior_only: bool = True,
) -> sp.csr_matrix:
    """Soma diag(c_{alpha beta}) D_{alpha beta}; coeficientes por no interior."""
    ops = stencils.interior if interior_only else stencils.full
    total: sp.csr_matrix | None = None
    for pair, coef in coefficients.items():
        term = sp.diags(np.asarray(coef, dtype=np.float64).ravel()) @ ops[pair]
        total = term if total is None else total + term
    if total is None:
        raise ValueError("Nenhum coeficiente informado")
    return total.tocsr()


def hermitian_coefficients(
    inverse: npt.NDArray[np.complex128],
) -> dict[Pair, npt.NDArray[np.float64]]:
    """Coeficientes reais de tr(B dA) em termos das derivadas segundas reais.

    B e a inversa (ou qualquer matriz hermitiana) de tamanho (n+1)x(n+1) por no;
    dA tem bloco espacial (1/2) d_{i jbar}, coluna (1/2) d_{t i} e canto (1/2) d_tt.
    """
    n = inverse.shape[-1] - 1
    shape = inverse.shape[:-2]
    acc: dict[Pair, npt.NDArray[np.complex128]] = {}

    def add(alpha: int, beta: int, value: npt.NDArray[np.complex128]) -> None:
        key = (min(alpha, beta), max(alpha, beta))
        acc[key] = acc.get(key, np.zeros(shape, dtype=np.complex128)) + value

    def x(i: int) -> int:
        return 1 + 2 * i

    def y(i: int) -> int:
        return 2 + 2 * i

    for i in range(n):
        for j in range(n):
            b_ji = inverse[..., j, i]
            add(x(i), x(j), b_ji / 8.0)
            add(y(i), y(j), b_ji / 8.0)
            add(x(i), y(j), 1j * b_ji / 8.0)
            add(y(i), x(j), -1j * b_ji / 8.0)
    for i in range(n):
        b_ni = inverse[..., n, i]
        b_in = inverse[..., i, n]
        add(0, x(i), (b_ni + b_in) / 4.0)
        add(0, y(i), 1j * (b_in - b_ni) / 4.0)
    add(0, 0, inverse[..., n, n] / 2.0)
    return {pair: value.real.copy() for pair, value in acc.items()}


# "Divide as dificuldades em tantas parcelas quanto for possivel." - Rene Descartes
