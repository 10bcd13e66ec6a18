"""
Geometry Module
Modelo transverso de Kahler sobre o toro plano e calculo de funcoes basicas
em grade periodica: derivadas, metrica h_phi, pareamentos, medida e curvatura escalar.

Convencoes:
    - 2n eixos reais periodicos de periodo 1, ordem (x_1, y_1, ..., x_n, y_n).
    - Campos podem ter eixos extras a esquerda (ex: fatias de tempo); as derivadas
      sempre agem nos ultimos 2n eixos.
    - Matrizes hermitianas por no ficam nos dois ultimos eixos, M[..., i, j] = M_{i jbar}.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import numpy.typing as npt

from src.core.errors import AdmissibilityError, GridMismatchError

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]
SpatialField = FloatArray

FLAT_METRIC_SCALE = 0.5


@dataclass(frozen=True, eq=False)
class TransverseModel:
    """Geometria transversa de fundo: h_{i jbar} por no e pesos de quadratura."""
    n: int
    grid_dims: tuple[int, ...]
    h_second: ComplexArray
    weights: FloatArray

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"Dimensao complexa deve ser >= 1, recebido {self.n}")
        if len(self.grid_dims) != 2 * self.n:
            raise GridMismatchError(
                f"Esperados {2 * self.n} eixos reais, recebidos {len(self.grid_dims)}"
            )
        if any(d < 3 for d in self.grid_dims):
            raise ValueError(f"Cada eixo precisa de pelo menos 3 nos: {self.grid_dims}")
        if self.h_second.shape != (*self.grid_dims, self.n, self.n):
            raise GridMismatchError("h_second nao corresponde a grade")
        if not np.allclose(self.h_second, np.conj(np.swapaxes(self.h_second, -1, -2))):
            raise AdmissibilityError("h_second nao e hermitiana")
        min_eig = float(np.linalg.eigvalsh(self.h_second)[..., 0].min())
        if min_eig <= 0.0:
            raise AdmissibilityError("h_second nao e positiva definida", min_eig)

    @classmethod
    def flat(cls, n: int, grid_dims: tuple[int, ...] | list[int]) -> TransverseModel:
        """Toro plano: h = (1/2) identidade constante, pesos uniformes."""
        dims = tuple(int(d) for d in grid_dims)
        eye = np.eye(n, dtype=np.complex128) * FLAT_METRIC_SCALE
        h_second = np.broadcast_to(eye, (*dims, n, n)).copy()
        return cls.from_metric(n, dims, h_second)

    @classmethod
    def from_metric(
        cls, n: int, grid_dims: tuple[int, ...], h_second: ComplexArray
    ) -> TransverseModel:
        """Constroi o modelo normalizando os pesos para volume de fundo 1."""
        det_h = np.linalg.det(h_second).real
        weights = det_h / det_h.sum()
        return cls(n=n, grid_dims=tuple(grid_dims), h_second=h_second, weights=weights)

    @property
    def real_dim(self) -> int:
        return 2 * self.n

    @property
    def node_count(self) -> int:
        return int(np.prod(self.grid_dims))

    @cached_property
    def spacing(self) -> tuple[float, ...]:
        return tuple(1.0 / d for d in self.grid_dims)

    @cached_property
    def det_h(self) -> FloatArray:
        return np.linalg.det(self.h_second).real

    @cached_property
    def h_inverse(self) -> ComplexArray:
        return np.linalg.inv(self.h_second)

    def coordinates(self) -> list[FloatArray]:
        """Coordenadas reais dos nos (indexacao ij), uma grade por eixo."""
        axes = [np.arange(d) / d for d in self.grid_dims]
        return list(np.meshgrid(*axes, indexing="ij"))

    def coordinate(self, axis: int) -> FloatArray:
        return self.coordinates()[axis]

    def zeros(self) -> SpatialField:
        return np.zeros(self.grid_dims)

    def check_field(self, field: npt.NDArray[np.generic]) -> None:
        """Garante que os ultimos eixos do campo coincidem com a grade."""
        k = self.real_dim
        if field.ndim < k or tuple(field.shape[-k:]) != self.grid_dims:
            raise GridMismatchError(
                f"Campo com forma {field.shape} incompativel com grade {self.grid_dims}"
            )

    def refined(self, factor: int = 2) -> TransverseModel:
        """Mesmo modelo plano em grade refinada (so suportado para h constante)."""
        h0 = self.h_second.reshape(-1, self.n, self.n)
        if not np.allclose(h0, h0[0]):
            raise NotImplementedError("Refinamento so para metrica de fundo constante")
        dims = tuple(d * factor for d in self.grid_dims)
        h_second = np.broadcast_to(h0[0], (*dims, self.n, self.n)).copy()
        return TransverseModel.from_metric(self.n, dims, h_second)


@dataclass(frozen=True, eq=False)
class TransverseMetric:
    """Resultado de metric_matrix: h_phi por no e flag de admissibilidade."""
    matrix: ComplexArray
    min_eigenvalue: float

    @property
    def admissible(self) -> bool:
        return self.min_eigenvalue > 0.0


def _axis(field: npt.NDArray[np.generic], model: TransverseModel, axis: int) -> int:
    return field.ndim - model.real_dim + axis


def first_derivative(
    field: npt.NDArray[np.generic], model: TransverseModel, axis: int
) -> npt.NDArray[np.generic]:
    """Diferenca central periodica de segunda ordem no eixo real dado."""
    ax = _axis(field, model, axis)
    step = model.spacing[axis]
    return (np.roll(field, -1, axis=ax) - np.roll(field, 1, axis=ax)) / (2.0 * step)


def second_derivative(
    field: npt.NDArray[np.generic], model: TransverseModel, a: int, b: int
) -> npt.NDArray[np.generic]:
    """Derivada segunda real d_a d_b; diagonal pelo estencil de 3 pontos."""
    if a == b:
        ax = _axis(field, model, a)
        step = model.spacing[a]
        return (np.roll(field, -1, axis=ax) - 2.0 * field + np.roll(field, 1, axis=ax)) / step**2
    lo, hi = min(a, b), max(a, b)
    return first_derivative(first_derivative(field, model, hi), model, lo)


def complex_gradient(field: npt.NDArray[np.generic], model: TransverseModel) -> ComplexArray:
    """Derivadas complexas u_i = (1/2)(d_{x_i} - sqrt(-1) d_{y_i}) u, no ultimo eixo."""
    parts = [
        0.5 * (
            first_derivative(field, model, 2 * i)
            - 1j * first_derivative(field, model, 2 * i + 1)
        )
        for i in range(model.n)
    ]
    return np.stack(parts, axis=-1)


def complex_hessian(field: SpatialField, model: TransverseModel) -> ComplexArray:
    """phi_{i jbar} por diferencas centrais; hermitiana por construcao.

    Cada derivada mista real e calculada uma unica vez e reutilizada nas
    duas posicoes simetricas, logo a hermiticidade e exata em ponto flutuante.
    """
    model.check_field(field)
    dim = model.real_dim
    d2: dict[tuple[int, int], FloatArray] = {}
    for a in range(dim):
        for b in range(a, dim):
            d2[(a, b)] = second_derivative(field, model, a, b)

    def pair(a: int, b: int) -> FloatArray:
        return d2[(min(a, b), max(a, b))]

    n = model.n
    out = np.empty((*field.shape, n, n), dtype=np.complex128)
    for i in range(n):
        xi, yi = 2 * i, 2 * i + 1
        for j in range(n):
            xj, yj = 2 * j, 2 * j + 1
            real = 0.25 * (pair(xi, xj) + pair(yi, yj))
            if i == j:
                out[..., i, j] = real
            else:
                out[..., i, j] = real + 0.25j * (pair(xi, yj) - pair(yi, xj))
    return out


def transverse_laplacian(field: SpatialField, model: TransverseModel) -> FloatArray:
    """Laplaciano transverso de fundo Delta_T u = 2 tr(h^{-1} u_{i jbar})."""
    hess = complex_hessian(field, model)
    return 2.0 * np.einsum("...ji,...ij->...", model.h_inverse, hess).real


def metric_matrix(phi: SpatialField, model: TransverseModel) -> TransverseMetric:
    """h_phi = h + (1/2) phi_{i jbar}; nao admissibilidade e flag, nao erro."""
    matrix = model.h_second + 0.5 * complex_hessian(phi, model)
    min_eig = float(np.linalg.eigvalsh(matrix)[..., 0].min())
    return TransverseMetric(matrix=matrix, min_eigenvalue=min_eig)


def _require_admissible(metric: TransverseMetric, where: str) -> None:
    if not metric.admissible:
        raise AdmissibilityError(
            f"{where}: h_phi nao positiva (menor autovalor {metric.min_eigenvalue:.3e})",
            metric.min_eigenvalue,
        )


def hermitian_pairing(
    a_vec: ComplexArray, b_vec: ComplexArray, metric_inv: ComplexArray
) -> FloatArray:
    """<a, b> = (h^{-1})^{i jbar}(a_i b_jbar + b_i a_jbar) = 2 Re(a^H M^{-1} b)."""
    return 2.0 * np.einsum("...i,...ij,...j->...", np.conj(a_vec), metric_inv, b_vec).real


def gradient_pairing(
    a: SpatialField, b: SpatialField, phi: SpatialField, model: TransverseModel
) -> FloatArray:
    """<d_B a, d_B b>_{g_phi}; |d_B a|^2 = 2 (h_phi)^{i jbar} a_i a_jbar."""
    model.check_field(a)
    model.check_field(b)
    metric = metric_matrix(phi, model)
    _require_admissible(metric, "gradient_pairing")
    inv = np.linalg.inv(metric.matrix)
    return hermitian_pairing(complex_gradient(a, model), complex_gradient(b, model), inv)


def measure_density(phi: SpatialField, model: TransverseModel) -> FloatArray:
    """rho_phi = det(h_phi)/det(h)."""
    metric = metric_matrix(phi, model)
    return np.linalg.det(metric.matrix).real / model.det_h


def integrate(
    field: FloatArray, model: TransverseModel, phi: SpatialField | None = None
) -> float:
    """Integral por quadratura contra d mu_0 (ou d mu_phi se phi for dado)."""
    model.check_field(field)
    if phi is None:
        return float(np.sum(model.weights * field))
    return float(np.sum(model.weights * measure_density(phi, model) * field))


def weil_peterson(
    u: SpatialField, v: SpatialField, phi: SpatialField, model: TransverseModel
) -> float:
    """Produto interno (u, v)_phi = integral de u v d mu_phi."""
    return integrate(u * v, model, phi)


def transverse_scalar_curvature(phi: SpatialField, model: TransverseModel) -> FloatArray:
    """S^T = -tr(h_phi^{-1} L), L = (log det h_phi)_{i jbar}.

    E a razao pontual 2n rho^T ^ (d eta_phi)^{n-1} / (d eta_phi)^n; para n=1
    reduz a -(log det h_phi)_{z zbar} / (h_phi)_{z zbar}.
    """
    metric = metric_matrix(phi, model)
    _require_admissible(metric, "transverse_scalar_curvature")
    det = np.linalg.det(metric.matrix).real
    if np.any(det <= 0.0):
        raise AdmissibilityError("det(h_phi) nao positivo")
    ricci_potential = complex_hessian(np.log(det), model)
    inv = np.linalg.inv(metric.matrix)
    return -np.einsum("...ji,...ij->...", inv, ricci_potential).real


# "A geometria e a arte de raciocinar bem sobre figuras mal feitas." - Henri Poincare
