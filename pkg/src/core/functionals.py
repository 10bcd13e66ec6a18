"""
Functionals Module
Funcionais geometricos sobre potenciais e caminhos: I, S barra, energia K (mu),
derivada covariante, norma de dbar_B V, energia do caminho, comprimento e distancia.

Todas as derivadas em t usam os mesmos estenceis centrais do solver
(velocidade e aceleracao unilaterais de 2a ordem so nas fatias de fronteira).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from src.core.cone import PotentialPath, path_acceleration, path_velocity
from src.core.config import SolverConfig
from src.core.errors import AdmissibilityError
from src.core.geometry import (
    FloatArray,
    SpatialField,
    TransverseModel,
    complex_gradient,
    complex_hessian,
    first_derivative,
    gradient_pairing,
    integrate,
    metric_matrix,
    transverse_laplacian,
    transverse_scalar_curvature,
)
from src.core.solver import solve_geodesic

logger = logging.getLogger(__name__)


def elementary_densities(phi: SpatialField, model: TransverseModel) -> list[FloatArray]:
    """sigma_p dos autovalores de h^{-1} (phi_{i jbar}/2), p = 0..n, por no.

    Identidades de Newton sobre tracos de potencias; sum_p sigma_p = rho_phi.
    """
    relative = np.linalg.solve(model.h_second, 0.5 * complex_hessian(phi, model))
    current = relative
    traces = []
    for _ in range(model.n):
        traces.append(np.trace(current, axis1=-2, axis2=-1).real)
        current = current @ relative
    sigma = [np.ones(model.grid_dims)]
    for k in range(1, model.n + 1):
        total = np.zeros(model.grid_dims)
        for i in range(1, k + 1):
            total += (-1) ** (i - 1) * sigma[k - i] * traces[i - 1]
        sigma.append(total / k)
    return sigma


def i_functional(phi: SpatialField, model: TransverseModel) -> float:
    """I(phi) = sum_p 1/(p+1) integral phi sigma_p d mu_0.

    Coeficiente n!/((p+1)!(n-p)!) vezes a densidade relativa sigma_p / C(n,p);
    normalizado de forma que dI/dt = integral phi_t d mu_phi.
    """
    sigma = elementary_densities(phi, model)
    return sum(integrate(phi * s, model) / (p + 1) for p, s in enumerate(sigma))


def _shift_slope(phi: SpatialField, model: TransverseModel) -> float:
    sigma = elementary_densities(phi, model)
    return sum(integrate(s, model) / (p + 1) for p, s in enumerate(sigma))


def normalize_h0(phi: SpatialField, model: TransverseModel) -> tuple[SpatialField, float]:
    """Decompoe H = H_0 x R: devolve (phi - c, c) com I(phi - c) = 0.

    Somar constante nao muda a hessiana, logo I e afim em c.
    """
    c = i_functional(phi, model) / _shift_slope(phi, model)
    return phi - c, c


def s_bar(model: TransverseModel, phi: SpatialField | None = None) -> float:
    """Media de S^T contra d mu_phi (phi = 0 por padrao); invariante da classe."""
    phi = model.zeros() if phi is None else phi
    scalar = transverse_scalar_curvature(phi, model)
    return integrate(scalar, model, phi) / integrate(np.ones(model.grid_dims), model, phi)


def _require_slices(path: PotentialPath, model: TransverseModel) -> None:
    path.check_model(model)
    for k, phi in enumerate(path.slices):
        metric = metric_matrix(phi, model)
        if not metric.admissible:
            raise AdmissibilityError(f"Fatia {k} inadmissivel", metric.min_eigenvalue)


def _k_energy_rate(path: PotentialPath, model: TransverseModel, sbar: float) -> FloatArray:
    velocity = path_velocity(path)
    return np.array([
        -integrate(velocity[k] * (transverse_scalar_curvature(path.slices[k], model) - sbar),
                   model, path.slices[k])
        for k in range(path.nt + 1)
    ])


def k_energy(
    path: PotentialPath, model: TransverseModel, sbar: float | None = None
) -> FloatArray:
    """mu(t_k) por trapezio de d mu/dt = -(phi_t, S^T - S barra)_phi, com mu(0) = 0."""
    _require_slices(path, model)
    sbar = s_bar(model) if sbar is None else sbar
    rate = _k_energy_rate(path, model, sbar)
    return cumulative_trapezoid(rate, path.times, initial=0.0)


def k_energy_shift_defect(
    phi: SpatialField, shift: float, model: TransverseModel, nt: int = 8
) -> float:
    """mu ao longo de phi + t C; nulo porque constantes nao mudam a energia K."""
    path = PotentialPath.from_function(lambda t: phi + t * shift, nt)
    return float(k_energy(path, model)[-1])


def cov_derivative(
    psi: FloatArray, path: PotentialPath, k: int, model: TransverseModel
) -> SpatialField:
    """D_{phi_t} psi = psi_t - (1/4) <d_B psi, d_B phi_t>_phi na fatia interior k."""
    if not 1 <= k <= path.nt - 1:
        raise IndexError(f"Derivada covariante so em fatias interiores, recebido k={k}")
    if psi.shape != path.slices.shape:
        raise ValueError("psi deve ter uma fatia por tempo do caminho")
    dt = path.dt
    psi_t = (psi[k + 1] - psi[k - 1]) / (2.0 * dt)
    phi_t = (path.slices[k + 1] - path.slices[k - 1]) / (2.0 * dt)
    return psi_t - 0.25 * gradient_pairing(psi[k], phi_t, path.slices[k], model)


def geodesic_defect(path: PotentialPath, k: int, model: TransverseModel) -> SpatialField:
    """Q = D_{phi_t} phi_t = phi_tt - (1/4)|d_B phi_t|^2 com o estencil compacto do solver.

    Em fatias de fronteira usa as derivadas unilaterais.
    """
    if 1 <= k <= path.nt - 1:
        dt = path.dt
        phi = path.slices
        acc = (phi[k + 1] - 2.0 * phi[k] + phi[k - 1]) / dt**2
        vel = (phi[k + 1] - phi[k - 1]) / (2.0 * dt)
    else:
        acc = path_acceleration(path)[k]
        vel = path_velocity(path)[k]
    return acc - 0.25 * gradient_pairing(vel, vel, path.slices[k], model)


def dbar_v_norm_sq(psi: SpatialField, phi: SpatialField, model: TransverseModel) -> FloatArray:
    """|dbar_B V(psi)|^2 com V^i = h_phi^{i jbar} psi_jbar e T^i_kbar = d_kbar V^i.

    Indice i abaixado com h_phi e kbar levantado com h_phi^{-1}; com isso
    ao longo de phi = t psi no toro plano d^2 mu/dt^2(0) = (1/2) integral |T|^2.
    """
    metric = metric_matrix(phi, model)
    if not metric.admissible:
        raise AdmissibilityError("dbar_v_norm_sq: h_phi inadmissivel", metric.min_eigenvalue)
    inverse = np.linalg.inv(metric.matrix)
    grad_bar = np.conj(complex_gradient(psi, model))
    field = np.einsum("...ji,...j->...i", inverse, grad_bar)
    tensor = dbar_components(field, model)
    return np.einsum(
        "...il,...km,...ik,...lm->...", metric.matrix, inverse, tensor, np.conj(tensor)
    ).real


def dbar_components(field: np.ndarray, model: TransverseModel) -> np.ndarray:
    """T[..., i, k] = d_kbar field^i, d_kbar = (1/2)(d_{x_k} + sqrt(-1) d_{y_k})."""
    # eixo i no final; as derivadas agem nos eixos espaciais antes dele
    moved = np.moveaxis(field, -1, 0)
    out = np.empty((*field.shape, model.n), dtype=np.complex128)
    for k in range(model.n):
        dx = first_derivative(moved, model, 2 * k)
        dy = first_derivative(moved, model, 2 * k + 1)
        out[..., k] = np.moveaxis(0.5 * (dx + 1j * dy), 0, -1)
    return out


def k_energy_hessian_check(
    path: PotentialPath,
    model: TransverseModel,
    sbar: float | None = None,
    holomorphy_weight: float = 0.5,
) -> FloatArray:
    """Defeito da identidade da hessiana de mu em cada fatia interior.

    delta_k = (mu_{k+1} - 2 mu_k + mu_{k-1})/dt^2
              - [ -(D phi_t, S^T - S barra)_phi + integral (1/2)|dbar_B V(phi_t)|^2 d mu_phi ].
    """
    sbar = s_bar(model) if sbar is None else sbar
    mu = k_energy(path, model, sbar)
    dt = path.dt
    defects = np.empty(path.nt - 1)
    for k in range(1, path.nt):
        phi = path.slices[k]
        velocity = (path.slices[k + 1] - path.slices[k - 1]) / (2.0 * dt)
        scalar = transverse_scalar_curvature(phi, model) - sbar
        curvature_term = -integrate(geodesic_defect(path, k, model) * scalar, model, phi)
        holomorphy = dbar_v_norm_sq(velocity, phi, model)
        holomorphy_term = holomorphy_weight * integrate(holomorphy, model, phi)
        second = (mu[k + 1] - 2.0 * mu[k] + mu[k - 1]) / dt**2
        defects[k - 1] = second - (curvature_term + holomorphy_term)
    return defects


def path_energy(path: PotentialPath, model: TransverseModel) -> FloatArray:
    """E(t_k) = integral phi_t^2 d mu_phi."""
    path.check_model(model)
    velocity = path_velocity(path)
    return np.array([
        integrate(velocity[k] ** 2, model, path.slices[k]) for k in range(path.nt + 1)
    ])


def geodesic_length(path: PotentialPath, model: TransverseModel) -> float:
    """Comprimento = integral em t de sqrt(E) pela regra do trapezio."""
    energy = np.maximum(path_energy(path, model), 0.0)
    return float(trapezoid(np.sqrt(energy), path.times))


def distance(
    phi0: SpatialField,
    phi1: SpatialField,
    cfg: SolverConfig,
    model: TransverseModel,
    nt: int,
    f: SpatialField | None = None,
) -> float:
    """Distancia geodesica: comprimento da eps_min-geodesica entre phi0 e phi1."""
    path, _ = solve_geodesic(phi0, phi1, cfg, model, nt, f)
    value = geodesic_length(path, model)
    logger.info("Distancia: %.6f (eps_min=%g, nt=%d)", value, cfg.eps_min, nt)
    return value


@dataclass(frozen=True, eq=False)
class PathDiagnostics:
    """Series por fatia e escalares de um caminho."""
    times: FloatArray
    energy: FloatArray
    i_values: FloatArray
    mu: FloatArray
    q_mean: FloatArray
    q_max: FloatArray
    sup_abs_phitt: FloatArray
    sup_abs_lap: FloatArray
    length: float
    s_bar: float

    COLUMNS = ("t", "E", "I", "mu", "Q_mean", "Q_max", "sup_abs_phitt", "sup_abs_lap")

    def rows(self) -> list[tuple[float, ...]]:
        series = (self.times, self.energy, self.i_values, self.mu,
                  self.q_mean, self.q_max, self.sup_abs_phitt, self.sup_abs_lap)
        return [tuple(float(col[k]) for col in series) for k in range(len(self.times))]


def path_diagnostics(path: PotentialPath, model: TransverseModel) -> PathDiagnostics:
    """Calcula E, I, mu, Q e sups de segunda ordem em todas as fatias."""
    sbar = s_bar(model)
    energy = path_energy(path, model)
    defects = [geodesic_defect(path, k, model) for k in range(path.nt + 1)]
    acceleration = path_acceleration(path)
    return PathDiagnostics(
        times=path.times,
        energy=energy,
        i_values=np.array([i_functional(phi, model) for phi in path.slices]),
        mu=k_energy(path, model, sbar),
        q_mean=np.array([integrate(q, model) for q in defects]),
        q_max=np.array([float(q.max()) for q in defects]),
        sup_abs_phitt=np.abs(acceleration).reshape(path.nt + 1, -1).max(axis=1),
        sup_abs_lap=np.array([
            float(np.abs(transverse_laplacian(phi, model)).max()) for phi in path.slices
        ]),
        length=float(trapezoid(np.sqrt(np.maximum(energy, 0.0)), path.times)),
        s_bar=sbar,
    )


# "O caminho se faz caminhando." - Antonio Machado
