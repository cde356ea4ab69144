"""
Noyau ponctuel du tenseur de conformation.

Opérateur de rotation de Gordon-Schowalter, état d'équilibre, pas d'Euler
implicite écrit comme une petite équation de Lyapunov, passage conformation →
contrainte et diagnostics de définie positivité.

Deux interfaces coexistent : une interface ponctuelle sur des dataclasses
(``AxiTensor``, ``VelGrad``) et une interface vectorisée sur des tableaux
``(N, 4)`` de composantes ``[rr, rz, zz, tt]``, utilisée par les solveurs.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .config import config
from .errors import InvalidParameterError, PositivityLossError, StepTooLargeError
from .params import JsParams

logger = logging.getLogger(__name__)

# Colonnes des tableaux de conformation
RR, RZ, ZZ, TT = 0, 1, 2, 3


@dataclass(frozen=True)
class SymTensor2:
    """Tenseur symétrique 2×2 dans le plan méridien."""

    xx: float
    xy: float
    yy: float

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.xx, self.xy], [self.xy, self.yy]])

    def is_spd(self) -> bool:
        return self.xx > 0.0 and self.yy > 0.0 and self.xx * self.yy - self.xy**2 > 0.0


@dataclass(frozen=True)
class AxiTensor:
    """Tenseur axisymétrique : partie plane (rr, rz, zz) et composante orthoradiale tt."""

    rr: float
    rz: float
    zz: float
    tt: float

    @property
    def in_plane(self) -> SymTensor2:
        return SymTensor2(self.rr, self.rz, self.zz)

    def as_array(self) -> np.ndarray:
        return np.array([self.rr, self.rz, self.zz, self.tt], dtype=float)

    @classmethod
    def from_array(cls, values) -> "AxiTensor":
        rr, rz, zz, tt = (float(v) for v in values)
        return cls(rr, rz, zz, tt)

    def is_spd(self) -> bool:
        return self.in_plane.is_spd() and self.tt > 0.0


@dataclass(frozen=True)
class VelGrad:
    """
    Gradient de vitesse : L_ij = ∂u_i/∂x_j dans le plan et taux orthoradial u_r/r.

    En mode plan (canal 1-D), ``hoop`` vaut 0.
    """

    L: np.ndarray
    hoop: float = 0.0

    @classmethod
    def shear(cls, kappa: float) -> "VelGrad":
        """Cisaillement simple u_x = κ y."""
        return cls(np.array([[0.0, kappa], [0.0, 0.0]]), 0.0)

    def divergence(self) -> float:
        return float(np.trace(self.L)) + self.hoop


# --------------------------- Rotation de Gordon-Schowalter ---------------------------

def gs_rotation(L: VelGrad, a: float) -> Tuple[np.ndarray, float]:
    """
    R(u) = ½((a+1)∇u + (a−1)∇uᵀ) et sa composante orthoradiale a·u_r/r.

    Returns:
        Tuple[np.ndarray, float]: (R 2×2, R_tt).
    """
    grad = np.asarray(L.L, dtype=float)
    R = 0.5 * ((a + 1.0) * grad + (a - 1.0) * grad.T)
    return R, a * L.hoop


def gs_rotation_batch(L: np.ndarray, hoop: np.ndarray, a: float) -> Tuple[np.ndarray, np.ndarray]:
    """Version vectorisée de ``gs_rotation`` pour L de forme (N, 2, 2)."""
    R = 0.5 * ((a + 1.0) * L + (a - 1.0) * np.swapaxes(L, 1, 2))
    return R, a * hoop


# --------------------------- Équilibre et contrainte ---------------------------

def equilibrium_conformation(p: JsParams) -> AxiTensor:
    """
    Conformation d'équilibre (μ_p / (a Wi)) δ.

    Raises:
        InvalidParameterError: si a ≤ 0.
    """
    if p.a <= 0.0:
        raise InvalidParameterError(config.ERROR_MESSAGES["invalid_parameter"].format(detail="a doit être > 0"))
    value = p.c_eq
    return AxiTensor(value, 0.0, value, value)


def equilibrium_array(p: JsParams, n: int) -> np.ndarray:
    """Champ de conformation d'équilibre sur n nœuds."""
    eq = equilibrium_conformation(p).as_array()
    return np.tile(eq, (n, 1))


def stress_from_conformation(c: AxiTensor, p: JsParams) -> AxiTensor:
    """Contrainte polymère τ_p = c − (μ_p / (a Wi)) δ."""
    shift = p.c_eq
    return AxiTensor(c.rr - shift, c.rz, c.zz - shift, c.tt - shift)


def stress_from_conformation_array(c: np.ndarray, p: JsParams) -> np.ndarray:
    tau = np.array(c, dtype=float, copy=True)
    tau[:, [RR, ZZ, TT]] -= p.c_eq
    return tau


# --------------------------- Diagnostics ---------------------------

def min_eigenvalue(c: AxiTensor) -> float:
    """Plus petite valeur propre (forme fermée 2×2 et composante tt)."""
    return float(min_eigenvalue_batch(c.as_array()[None, :])[0])


def min_eigenvalue_batch(c: np.ndarray) -> np.ndarray:
    mean = 0.5 * (c[:, RR] + c[:, ZZ])
    radius = np.hypot(0.5 * (c[:, RR] - c[:, ZZ]), c[:, RZ])
    return np.minimum(mean - radius, c[:, TT])


def is_spd_batch(c: np.ndarray) -> np.ndarray:
    det = c[:, RR] * c[:, ZZ] - c[:, RZ] ** 2
    return (c[:, RR] > 0.0) & (c[:, ZZ] > 0.0) & (det > 0.0) & (c[:, TT] > 0.0)


# --------------------------- Pas de Lyapunov ---------------------------

def lyapunov_operators(L: np.ndarray, hoop: np.ndarray, p: JsParams, h_t: float):
    """
    Matrices A (N, 2, 2) et scalaires A_tt (N,) du pas implicite.

    A = ½(1 + Wi/h_t) I − Wi R(L), A_tt = ½(1 + Wi/h_t) − Wi a u_r/r.
    """
    R, R_tt = gs_rotation_batch(L, hoop, p.a)
    diag = 0.5 * (1.0 + p.Wi / h_t)
    A = -p.Wi * R
    A[:, 0, 0] += diag
    A[:, 1, 1] += diag
    A_tt = diag - p.Wi * R_tt
    return A, A_tt


def lyapunov_rhs(c_foot: np.ndarray, p: JsParams, h_t: float) -> np.ndarray:
    """C = (μ_p / (a Wi)) δ + (Wi / h_t) c∘y, en composantes [rr, rz, zz, tt]."""
    C = (p.Wi / h_t) * c_foot
    C[:, [RR, ZZ, TT]] += p.c_eq
    return C


def lyapunov_step_batch(c_foot: np.ndarray, L: np.ndarray, hoop: np.ndarray,
                        p: JsParams, h_t: float, check: bool = True) -> np.ndarray:
    """
    Résout A c + c Aᵀ = C nœud par nœud.

    La partie plane devient un système 3×3 en (c_rr, c_rz, c_zz), résolu par
    élimination de Gauss avec pivot partiel (LAPACK via numpy) ; la composante
    tt est découplée.

    Args:
        c_foot (np.ndarray): Conformation aux pieds des caractéristiques, (N, 4).
        L (np.ndarray): Gradients de vitesse (N, 2, 2).
        hoop (np.ndarray): Taux orthoradiaux u_r/r, (N,).
        p (JsParams): Paramètres du modèle.
        h_t (float): Pas de temps.
        check (bool): Vérifier la définie positivité du résultat.

    Returns:
        np.ndarray: Nouvelle conformation (N, 4).

    Raises:
        StepTooLargeError: Système singulier sur au moins un nœud.
        PositivityLossError: Résultat non défini positif.
    """
    c_foot = np.asarray(c_foot, dtype=float)
    L = np.asarray(L, dtype=float)
    hoop = np.asarray(hoop, dtype=float)
    n = c_foot.shape[0]

    A, A_tt = lyapunov_operators(L, hoop, p, h_t)
    C = lyapunov_rhs(c_foot, p, h_t)

    M = np.zeros((n, 3, 3))
    M[:, 0, 0] = 2.0 * A[:, 0, 0]
    M[:, 0, 1] = 2.0 * A[:, 0, 1]
    M[:, 1, 0] = A[:, 1, 0]
    M[:, 1, 1] = A[:, 0, 0] + A[:, 1, 1]
    M[:, 1, 2] = A[:, 0, 1]
    M[:, 2, 1] = 2.0 * A[:, 1, 0]
    M[:, 2, 2] = 2.0 * A[:, 1, 1]

    # det(M) = 4 det(A) tr(A) : nul si A et −Aᵀ partagent une valeur propre
    scale = np.abs(M).max(axis=(1, 2))
    det = 4.0 * np.linalg.det(A) * np.trace(A, axis1=1, axis2=2)
    singular = (np.abs(det) <= 1e-13 * scale**3) | (np.abs(A_tt) <= 1e-13 * np.abs(A).max(axis=(1, 2)))
    if np.any(singular):
        count = int(np.count_nonzero(singular))
        logger.error(f"❌ Système de Lyapunov singulier sur {count} nœud(s)")
        raise StepTooLargeError(config.ERROR_MESSAGES["step_too_large"].format(count=count))

    rhs = C[:, [RR, RZ, ZZ]]
    sol = np.linalg.solve(M, rhs[:, :, None])[:, :, 0]

    c_new = np.empty_like(c_foot)
    c_new[:, [RR, RZ, ZZ]] = sol
    c_new[:, TT] = C[:, TT] / (2.0 * A_tt)

    if check:
        ensure_spd(c_new)
    return c_new


def ensure_spd(c: np.ndarray) -> None:
    """
    Vérifie la définie positivité d'un champ de conformation.

    Raises:
        PositivityLossError: si au moins un nœud n'est pas SPD.
    """
    ok = is_spd_batch(c)
    if not np.all(ok):
        bad = np.nonzero(~ok)[0]
        value = float(min_eigenvalue_batch(c[bad]).min())
        logger.error(f"❌ Perte de positivité sur {bad.size} nœud(s), valeur propre min {value:.3e}")
        raise PositivityLossError(
            config.ERROR_MESSAGES["positivity_loss"].format(value=value), nodes=bad, min_eigenvalue=value
        )


def lyapunov_step(c_foot: AxiTensor, L_new: VelGrad, p: JsParams, h_t: float) -> AxiTensor:
    """Pas implicite en un point (voir ``lyapunov_step_batch``)."""
    out = lyapunov_step_batch(
        c_foot.as_array()[None, :],
        np.asarray(L_new.L, dtype=float)[None, :, :],
        np.array([L_new.hoop]),
        p,
        h_t,
    )
    return AxiTensor.from_array(out[0])


def lyapunov_residual(c_new: np.ndarray, c_foot: np.ndarray, L: np.ndarray, hoop: np.ndarray,
                      p: JsParams, h_t: float) -> np.ndarray:
    """
    Résidu relatif ‖A c + c Aᵀ − C‖_F / ‖C‖_F par nœud (partie plane et tt).
    """
    A, A_tt = lyapunov_operators(np.asarray(L, dtype=float), np.asarray(hoop, dtype=float), p, h_t)
    C = lyapunov_rhs(np.asarray(c_foot, dtype=float), p, h_t)
    c_mat = _to_matrices(c_new)
    C_mat = _to_matrices(C)
    res = A @ c_mat + c_mat @ np.swapaxes(A, 1, 2) - C_mat
    res_tt = 2.0 * A_tt * c_new[:, TT] - C[:, TT]
    num = np.sqrt(np.sum(res**2, axis=(1, 2)) + res_tt**2)
    den = np.sqrt(np.sum(C_mat**2, axis=(1, 2)) + C[:, TT] ** 2)
    return num / den


def _to_matrices(c: np.ndarray) -> np.ndarray:
    mats = np.empty((c.shape[0], 2, 2))
    mats[:, 0, 0] = c[:, RR]
    mats[:, 0, 1] = c[:, RZ]
    mats[:, 1, 0] = c[:, RZ]
    mats[:, 1, 1] = c[:, ZZ]
    return mats


if __name__ == "__main__":
    # Test du module
    print("Test du module tensor_core...")
    params = JsParams(Wi=0.45, mu_s=0.03, xi=0.7)
    c = equilibrium_conformation(params)
    for _ in range(200):
        c = lyapunov_step(c, VelGrad.shear(1.0), params, 1.0)
    tau = stress_from_conformation(c, params)
    print(f"✅ τ_xy stationnaire = {tau.rz:.6f}, valeur propre min = {min_eigenvalue(c):.4f}")
