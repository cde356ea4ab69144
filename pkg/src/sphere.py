"""
Dynamique de la sphère : correction de paroi, force de traînée et équation du mouvement.

Bilan adimensionné (2 Re ℘ / 3) d_t U = 3K + F_d, avec U > 0 en chute et F_d
la composante de la force hydrodynamique dans le sens de la chute, normalisée
par 2π.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from .config import config
from .errors import ConfigurationError, InvalidParameterError
from .fem import FieldState, velocity_gradient_at
from .mesh import BoundaryTag, TriMesh, boundary_line_integral
from .params import JsParams
from .tensor_core import RR, RZ, ZZ

logger = logging.getLogger(__name__)

# Série de Bohlin / Haberman
_NUM = (1.0, 0.0, 0.0, 0.0, 0.0, -0.75857)
_DEN = (1.0, -2.1050, 0.0, 2.0865, 0.0, -1.7068, 0.72603)
ALPHA_MIN = 1.01


@dataclass(frozen=True)
class SphereState:
    """Vitesse U, accélération dU, facteur de paroi K et rapport de densités ℘."""

    U: float
    dU: float
    K: float
    rho_ratio: float

    def __post_init__(self):
        if self.K < 1.0:
            raise InvalidParameterError(config.ERROR_MESSAGES["invalid_parameter"].format(detail=f"K={self.K} < 1"))
        if self.rho_ratio <= 0.0:
            raise InvalidParameterError(
                config.ERROR_MESSAGES["invalid_parameter"].format(detail=f"rho_ratio={self.rho_ratio} ≤ 0")
            )

    @classmethod
    def at_rest(cls, K: float, rho_ratio: float) -> "SphereState":
        return cls(U=0.0, dU=0.0, K=K, rho_ratio=rho_ratio)


def wall_correction(alpha: float) -> float:
    """
    Facteur de correction de paroi K(λ), λ = 1/alpha.

    K = (1 − 0.75857 λ⁵) / (1 − 2.1050 λ + 2.0865 λ³ − 1.7068 λ⁵ + 0.72603 λ⁶).

    Raises:
        InvalidParameterError: alpha ≤ 1.01 (hors du domaine de validité de la série).
    """
    if not alpha > ALPHA_MIN:
        raise InvalidParameterError(
            config.ERROR_MESSAGES["invalid_parameter"].format(
                detail=f"alpha={alpha} hors du domaine de la correction de paroi (> {ALPHA_MIN}), fournir K"
            )
        )
    if np.isinf(alpha):
        return 1.0
    lam = 1.0 / alpha
    num = np.polynomial.polynomial.polyval(lam, _NUM)
    den = np.polynomial.polynomial.polyval(lam, _DEN)
    return float(num / den)


def _chord_normals(m: TriMesh, edge_ids: np.ndarray) -> np.ndarray:
    """Normales unitaires des cordes, orientées de la sphère vers le fluide."""
    a = m.vertices[m.edges[edge_ids, 0]]
    b = m.vertices[m.edges[edge_ids, 1]]
    d = b - a
    n = np.column_stack([d[:, 1], -d[:, 0]]) / np.hypot(d[:, 0], d[:, 1])[:, None]
    flip = np.sum(n * (0.5 * (a + b)), axis=1) < 0.0
    n[flip] *= -1.0
    return n


def traction(m: TriMesh, state: FieldState, p: JsParams, points: np.ndarray, edge_ids: np.ndarray) -> np.ndarray:
    """
    Vecteur contrainte σ·n aux points de bord, σ = −p δ + μ_s(∇u + ∇uᵀ) + τ_p.

    Returns:
        np.ndarray: (N, 2) composantes (r, z).
    """
    elements = m.edge_triangles[edge_ids, 0]
    bary = np.clip(m.index.barycentric(elements, points), 0.0, None)
    bary /= bary.sum(axis=1, keepdims=True)
    grad = velocity_gradient_at(m, state.u, elements, bary)
    strain = grad + np.swapaxes(grad, 1, 2)
    tri = m.triangles[elements]
    pressure = np.einsum("na,na->n", bary, state.p[tri])
    c = np.einsum("na,nak->nk", bary, state.c[tri])

    sigma = p.mu_s * strain
    sigma[:, 0, 0] += c[:, RR] - p.c_eq - pressure
    sigma[:, 0, 1] += c[:, RZ]
    sigma[:, 1, 0] += c[:, RZ]
    sigma[:, 1, 1] += c[:, ZZ] - p.c_eq - pressure
    n = _chord_normals(m, edge_ids)
    return np.einsum("nij,nj->ni", sigma, n)


def drag_force(m: TriMesh, state: FieldState, p: JsParams) -> float:
    """
    F_d = ∫_Sphere (σ·n)·(−e_z) r dℓ.

    Négative pendant la chute ; vaut −3K U à l'état stationnaire newtonien.
    """
    return boundary_line_integral(
        m, BoundaryTag.SPHERE, lambda x, e: -traction(m, state, p, x, e)[:, 1]
    )


def advance_sphere(s: SphereState, F_d: float, p: JsParams, h_t: float) -> SphereState:
    """
    Pas explicite de l'équation du mouvement.

    dU_new = 3 (3K + F_d) / (2 Re ℘), U_new = U + h_t dU_new.

    Raises:
        ConfigurationError: Re ≤ 0 (équation singulière).
    """
    if p.Re <= 0.0:
        raise ConfigurationError(
            config.ERROR_MESSAGES["invalid_config"].format(detail="Re doit être > 0 pour l'équation de la sphère")
        )
    dU = 3.0 * (3.0 * s.K + F_d) / (2.0 * p.Re * s.rho_ratio)
    return replace(s, U=s.U + h_t * dU, dU=dU)


if __name__ == "__main__":
    # Test du module
    print("Test du module sphere...")
    for alpha in (4.115, 6.115, 8.115):
        print(f"  K({alpha}) = {wall_correction(alpha):.4f}")
    state = advance_sphere(SphereState.at_rest(wall_correction(4.115), 6.3), 0.0, JsParams(Re=0.0325, Wi=0.45, mu_s=0.03), 1e-3)
    print(f"✅ dU depuis le repos = {state.dU:.3f}")
