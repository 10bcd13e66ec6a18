"""
Cone Module
Montagem da matriz espaco-tempo A(phi), residuo de Monge-Ampere em forma log-det
e levantamento para o cone de Kahler psi(r, .) = phi(2(r-1), .) + 4 log r,
usado como verificacao independente da formulacao em tempo.
"""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from src.core.errors import AdmissibilityError, GridMismatchError
from src.core.geometry import (
    ComplexArray,
    FloatArray,
    SpatialField,
    TransverseModel,
    complex_gradient,
    complex_hessian,
    hermitian_pairing,
)

logger = logging.getLogger(__name__)

CONE_LOG_FACTOR = 4.0
R_MIN = 1.0
R_MAX = 1.5


@dataclass(frozen=True, eq=False)
class PotentialPath:
    """phi(t_k, .) em nt+1 fatias, t_k = k/nt; fatias 0 e nt sao Dirichlet."""
    slices: FloatArray

    def __post_init__(self) -> None:
        values = np.array(self.slices, dtype=np.float64, copy=True)
        if values.ndim < 2 or values.shape[0] < 3:
            raise ValueError("Caminho precisa de pelo menos 3 fatias de tempo")
        if not np.all(np.isfinite(values)):
            raise ValueError("Caminho com valores nao finitos")
        values.setflags(write=False)
        object.__setattr__(self, "slices", values)

    @classmethod
    def from_function(
        cls,
        func: Callable[[float], SpatialField],
        nt: int,
    ) -> PotentialPath:
        """Amostra t -> phi(t, .) nas fatias t_k = k/nt."""
        return cls(np.stack([func(k / nt) for k in range(nt + 1)]))

    @classmethod
    def linear(cls, phi0: SpatialField, phi1: SpatialField, nt: int) -> PotentialPath:
        return cls.from_function(lambda t: (1.0 - t) * phi0 + t * phi1, nt)

    @property
    def nt(self) -> int:
        return self.slices.shape[0] - 1

    @property
    def dt(self) -> float:
        return 1.0 / self.nt

    @property
    def times(self) -> FloatArray:
        return np.linspace(0.0, 1.0, self.nt + 1)

    @property
    def grid_dims(self) -> tuple[int, ...]:
        return tuple(self.slices.shape[1:])

    @property
    def start(self) -> SpatialField:
        return self.slices[0]

    @property
    def end(self) -> SpatialField:
        return self.slices[-1]

    @property
    def interior(self) -> FloatArray:
        return self.slices[1:-1]

    def with_interior(self, interior: FloatArray) -> PotentialPath:
        """Novo caminho com as fatias interiores trocadas; bordas intocadas."""
        values = np.array(self.slices, copy=True)
        values[1:-1] = np.asarray(interior).reshape(values[1:-1].shape)
        return PotentialPath(values)

    def check_model(self, model: TransverseModel) -> None:
        if self.grid_dims != model.grid_dims:
            raise GridMismatchError(
                f"Caminho na grade {self.grid_dims}, modelo em {model.grid_dims}"
            )


@dataclass(frozen=True, eq=False)
class HermitianNode:
    """A(phi) por no espaco-tempo (eixos iniciais: fatias interiores pedidas)."""
    matrix: ComplexArray
    metric: ComplexArray
    metric_min_eigenvalue: FloatArray
    schur: FloatArray
    velocity_gradient: ComplexArray
    phi_tt: FloatArray

    @property
    def positive(self) -> np.ndarray:
        """Teste por complemento de Schur: h_phi > 0 e Schur > 0."""
        return (self.metric_min_eigenvalue > 0.0) & (self.schur > 0.0)

    @property
    def all_positive(self) -> bool:
        return bool(np.all(self.positive))

    @property
    def det_block(self) -> FloatArray:
        return np.linalg.det(self.metric).real * self.schur

    @property
    def det_direct(self) -> FloatArray:
        return np.linalg.det(self.matrix).real

    def log_det(self) -> FloatArray:
        """log det A = log det h_phi + log(Schur); exige positividade."""
        return np.log(np.linalg.det(self.metric).real) + np.log(self.schur)


def build_hermitian(
    metric: ComplexArray, velocity_gradient: ComplexArray, phi_tt: FloatArray
) -> HermitianNode:
    """Monta A a partir de h_phi, phi_{t i} e phi_tt (todos por no)."""
    n = metric.shape[-1]
    matrix = np.zeros((*metric.shape[:-2], n + 1, n + 1), dtype=np.complex128)
    matrix[..., :n, :n] = metric
    matrix[..., :n, n] = 0.5 * velocity_gradient
    matrix[..., n, :n] = 0.5 * np.conj(velocity_gradient)
    matrix[..., n, n] = 0.5 * phi_tt
    eigs = np.linalg.eigvalsh(metric)[..., 0]
    inverse = np.linalg.inv(metric)
    quad = np.einsum("...i,...ij,...j->...", np.conj(velocity_gradient), inverse, velocity_gradient)
    schur = 0.5 * phi_tt - 0.25 * quad.real
    return HermitianNode(
        matrix=matrix,
        metric=metric,
        metric_min_eigenvalue=eigs,
        schur=schur,
        velocity_gradient=velocity_gradient,
        phi_tt=phi_tt,
    )


def _assemble_range(
    path: PotentialPath, model: TransverseModel, lo: int, hi: int
) -> HermitianNode:
    """A(phi) nas fatias interiores lo..hi-1 (indices de tempo globais)."""
    phi = path.slices
    dt = path.dt
    center = phi[lo:hi]
    plus = phi[lo + 1: hi + 1]
    minus = phi[lo - 1: hi - 1]
    phi_t = (plus - minus) / (2.0 * dt)
    phi_tt = (plus - 2.0 * center + minus) / dt**2
    metric = model.h_second + 0.5 * complex_hessian(center, model)
    return build_hermitian(metric, complex_gradient(phi_t, model), phi_tt)


def assemble_A(path: PotentialPath, k: int, model: TransverseModel) -> HermitianNode:
    """A(phi) na fatia interior k (1 <= k <= nt-1) para todos os nos espaciais."""
    path.check_model(model)
    if not 1 <= k <= path.nt - 1:
        raise IndexError(f"Indice de tempo {k} fora de [1, {path.nt - 1}]")
    node = _assemble_range(path, model, k, k + 1)
    return HermitianNode(
        matrix=node.matrix[0],
        metric=node.metric[0],
        metric_min_eigenvalue=node.metric_min_eigenvalue[0],
        schur=node.schur[0],
        velocity_gradient=node.velocity_gradient[0],
        phi_tt=node.phi_tt[0],
    )


def assemble_interior(path: PotentialPath, model: TransverseModel) -> HermitianNode:
    """A(phi) em todas as fatias interiores de uma vez (eixo 0 = k-1)."""
    path.check_model(model)
    return _assemble_range(path, model, 1, path.nt)


def _check_rhs(eps: float, f: SpatialField | None, model: TransverseModel) -> FloatArray:
    if not eps > 0.0:
        raise ValueError(f"eps deve ser positivo, recebido {eps}")
    if f is None:
        return np.ones(model.grid_dims)
    model.check_field(f)
    if np.any(f <= 0.0):
        raise ValueError("f deve ser positiva em todos os nos")
    return np.asarray(f, dtype=np.float64)


def residual_from_node(
    node: HermitianNode, eps: float, f: SpatialField, model: TransverseModel
) -> FloatArray:
    """R = log det A - log((eps/2) f det h) nas fatias de node."""
    if not node.all_positive:
        worst = float(min(node.metric_min_eigenvalue.min(), node.schur.min()))
        raise AdmissibilityError("A(phi) nao e positiva em todos os nos interiores", worst)
    return node.log_det() - np.log(0.5 * eps * f * model.det_h)


def ma_residual(
    path: PotentialPath,
    eps: float,
    model: TransverseModel,
    f: SpatialField | None = None,
) -> FloatArray:
    """Residuo log-det da equacao regularizada em cada no interior."""
    rhs = _check_rhs(eps, f, model)
    node = assemble_interior(path, model)
    return residual_from_node(node, eps, rhs, model)


@dataclass(frozen=True, eq=False)
class ConeGrid:
    """psi(r_k, .) com r_k = 1 + t_k/2 em [1, 3/2]."""
    radii: FloatArray
    values: FloatArray

    @property
    def dr(self) -> float:
        return float(self.radii[1] - self.radii[0])


def radii_for(nt: int) -> FloatArray:
    return R_MIN + 0.5 * np.linspace(0.0, 1.0, nt + 1)


def _log_offset(radii: FloatArray, ndim: int) -> FloatArray:
    return (CONE_LOG_FACTOR * np.log(radii)).reshape((-1,) + (1,) * ndim)


def lift(path: PotentialPath) -> ConeGrid:
    """psi(r_k, .) = phi(t_k, .) + 4 log r_k."""
    radii = radii_for(path.nt)
    spatial_ndim = path.slices.ndim - 1
    return ConeGrid(radii=radii, values=path.slices + _log_offset(radii, spatial_ndim))


def unlift(cone: ConeGrid) -> PotentialPath:
    """Inverso exato de lift."""
    spatial_ndim = cone.values.ndim - 1
    return PotentialPath(cone.values - _log_offset(cone.radii, spatial_ndim))


@dataclass(frozen=True, eq=False)
class ConeIdentity:
    """Dois lados da identidade (Omega_psi)^{n+1} / omega^{n+1} = r^2 Q rho_phi."""
    lhs: FloatArray
    rhs: FloatArray
    discrepancy: float
    equation_discrepancy: float | None = None


def _relative(lhs: FloatArray, rhs: FloatArray) -> float:
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    diff = np.abs(lhs - rhs)
    rel = np.divide(diff, scale, out=np.zeros_like(diff), where=scale > 0.0)
    return float(rel.max())


def cone_identity_check(
    path: PotentialPath,
    model: TransverseModel,
    eps: float | None = None,
    f: SpatialField | None = None,
    require_positive: bool = True,
) -> ConeIdentity:
    """Compara o determinante do cone com a expressao em variaveis de tempo.

    Lado esquerdo: det direto da matriz (n+1)x(n+1) montada de psi com derivadas
    radiais (passo dr = dt/2). Lado direito: r^2 (phi_tt - |d phi_t|^2/4) det(h_phi)/det(h).
    Se eps for dado, tambem mede o desvio relativo de eps f r^2 (base f r^2 do cone).
    """
    path.check_model(model)
    node = assemble_interior(path, model)
    if require_positive and not node.all_positive:
        raise AdmissibilityError("Configuracao nao positiva para o teste do cone")

    cone = lift(path)
    psi = cone.values
    dr = cone.dr
    n = model.n
    r = cone.radii[1:-1].reshape((-1,) + (1,) * model.real_dim)
    psi_rr = (psi[2:] - 2.0 * psi[1:-1] + psi[:-2]) / dr**2
    psi_zr = complex_gradient((psi[2:] - psi[:-2]) / (2.0 * dr), model)

    bracket = np.zeros((*psi_rr.shape, n + 1, n + 1), dtype=np.complex128)
    bracket[..., :n, :n] = model.h_second + 0.5 * complex_hessian(psi[1:-1], model)
    bracket[..., :n, n] = 0.25 * psi_zr
    bracket[..., n, :n] = 0.25 * np.conj(psi_zr)
    bracket[..., n, n] = 0.125 * psi_rr + 0.5 / r**2
    lhs = 2.0 * r**2 * np.linalg.det(bracket).real / model.det_h

    inverse = np.linalg.inv(node.metric)
    grad_sq = hermitian_pairing(node.velocity_gradient, node.velocity_gradient, inverse)
    geodesic_defect = node.phi_tt - 0.25 * grad_sq
    rho = np.linalg.det(node.metric).real / model.det_h
    rhs = r**2 * geodesic_defect * rho

    equation = None
    if eps is not None:
        target = r**2 * eps * _check_rhs(eps, f, model)
        equation = float(np.max(np.abs(lhs - target) / target))

    result = ConeIdentity(lhs=lhs, rhs=rhs, discrepancy=_relative(lhs, rhs),
                          equation_discrepancy=equation)
    logger.debug("Identidade do cone: discrepancia %.3e", result.discrepancy)
    return result


def path_velocity(path: PotentialPath) -> FloatArray:
    """phi_t em todas as fatias: central no interior, unilateral de 2a ordem nas bordas."""
    return np.gradient(path.slices, path.dt, axis=0, edge_order=2)


def path_acceleration(path: PotentialPath) -> FloatArray:
    """phi_tt em todas as fatias; interior identico ao estencil do solver."""
    phi = path.slices
    dt = path.dt
    acc = np.empty_like(phi)
    acc[1:-1] = (phi[2:] - 2.0 * phi[1:-1] + phi[:-2]) / dt**2
    if path.nt >= 3:
        acc[0] = (2.0 * phi[0] - 5.0 * phi[1] + 4.0 * phi[2] - phi[3]) / dt**2
        acc[-1] = (2.0 * phi[-1] - 5.0 * phi[-2] + 4.0 * phi[-3] - phi[-4]) / dt**2
    else:
        acc[0] = acc[1]
        acc[-1] = acc[-2]
    return acc


def block_determinant_defect(node: HermitianNode) -> float:
    """max |det A - det(h_phi) Schur| / (1 + |det A|): duas rotas independentes."""
    direct = node.det_direct
    return float(np.max(np.abs(direct - node.det_block) / (1.0 + np.abs(direct))))


# "Tudo o que e solido se desmancha no ar." - Karl Marx
