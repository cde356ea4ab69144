"""
Pas de temps éléments finis axisymétrique.

Éléments de Taylor-Hood P2/P1 pour (u, p), P1 pour la conformation. Le
système de Stokes généralisé

    (Re/h_t) u − μ_s Δu + ∇p = f,   ∇·u = 0

est assemblé une fois avec la mesure r dr dz, factorisé par SuperLU puis
réutilisé à chaque pas. Les caractéristiques sont remontées par un schéma du
point milieu et les champs anciens sont interpolés à leurs pieds.

Ordre des inconnues : [u_r (nU), u_z (nU), p (nV)] avec nU = nV + nE.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .config import config
from .errors import SolverError
from .mesh import BoundaryTag, PointLocations, TriMesh, locate_points
from .params import JsParams
from .tensor_core import RR, RZ, TT, ZZ, equilibrium_array, lyapunov_step_batch, min_eigenvalue_batch

logger = logging.getLogger(__name__)

# Règle de Dunavant à 6 points, exacte au degré 4 (coordonnées barycentriques)
_A, _B = 0.445948490915965, 0.091576213509771
QUAD_POINTS = np.array(
    [
        [1.0 - 2.0 * _A, _A, _A],
        [_A, 1.0 - 2.0 * _A, _A],
        [_A, _A, 1.0 - 2.0 * _A],
        [1.0 - 2.0 * _B, _B, _B],
        [_B, 1.0 - 2.0 * _B, _B],
        [_B, _B, 1.0 - 2.0 * _B],
    ]
)
QUAD_WEIGHTS = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)


# --------------------------- Fonctions de forme ---------------------------

def p2_values(lam: np.ndarray) -> np.ndarray:
    """Fonctions P2 [v0, v1, v2, m01, m12, m20] en coordonnées barycentriques (…, 3)."""
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    return np.stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0],
        axis=-1,
    )


def p2_lambda_derivatives(lam: np.ndarray) -> np.ndarray:
    """Dérivées ∂N_a/∂λ_i, forme (…, 6, 3)."""
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    z = np.zeros_like(l0)
    rows = [
        [4 * l0 - 1, z, z],
        [z, 4 * l1 - 1, z],
        [z, z, 4 * l2 - 1],
        [4 * l1, 4 * l0, z],
        [z, 4 * l2, 4 * l1],
        [4 * l2, z, 4 * l0],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def lambda_gradients(m: TriMesh, elements: Optional[np.ndarray] = None) -> np.ndarray:
    """Gradients (constants) des coordonnées barycentriques, forme (n, 3, 2)."""
    inv = m.index.inv_jac if elements is None else m.index.inv_jac[elements]
    g1, g2 = inv[:, 0, :], inv[:, 1, :]
    return np.stack([-(g1 + g2), g1, g2], axis=1)


def p2_gradients(m: TriMesh, elements: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Gradients physiques des fonctions P2 aux points (élément, λ), forme (n, 6, 2)."""
    return np.einsum("nai,nik->nak", p2_lambda_derivatives(lam), lambda_gradients(m, elements))


# --------------------------- État discret ---------------------------

@dataclass
class FieldState:
    """
    Champs discrets à un niveau de temps.

    Attributes:
        u (np.ndarray): Vitesse P2 (nU, 2), colonnes (u_r, u_z).
        p (np.ndarray): Pression P1 (nV,).
        c (np.ndarray): Conformation P1 (nV, 4), colonnes [rr, rz, zz, tt].
        t (float): Temps.
    """

    u: np.ndarray
    p: np.ndarray
    c: np.ndarray
    t: float = 0.0

    @classmethod
    def at_rest(cls, m: TriMesh, params: JsParams) -> "FieldState":
        """Fluide au repos, conformation à l'équilibre."""
        return cls(
            u=np.zeros((m.n_vertices + m.n_edges, 2)),
            p=np.zeros(m.n_vertices),
            c=equilibrium_array(params, m.n_vertices),
            t=0.0,
        )

    def min_eigenvalue(self) -> float:
        return float(min_eigenvalue_batch(self.c).min())


@dataclass
class Feet:
    """Pieds des caractéristiques de tous les nœuds P2 (les nV premiers sont les sommets)."""

    points: np.ndarray
    locations: PointLocations

    @property
    def n_outside(self) -> int:
        return int(np.count_nonzero(~self.locations.inside))


# --------------------------- Opérateur de Stokes ---------------------------

@dataclass(eq=False)
class MomentumOperator:
    """
    Opérateur de point-selle assemblé et factorisé.

    Les matrices élémentaires sont conservées pour assembler les seconds membres
    (masse, divergence faible de c) et projeter les gradients nodaux.
    """

    mesh: TriMesh
    params: JsParams
    h_t: float
    sigma: float
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    hoop: sp.csr_matrix
    d_r: sp.csr_matrix
    d_z: sp.csr_matrix
    t_rz: sp.csr_matrix
    lumped_p1: np.ndarray
    saddle: sp.csr_matrix
    dirichlet: np.ndarray
    free: np.ndarray
    lu: object
    coupling: sp.csr_matrix
    free_block: sp.csc_matrix

    @property
    def n_u(self) -> int:
        return self.mesh.n_vertices + self.mesh.n_edges

    @property
    def n_p(self) -> int:
        return self.mesh.n_vertices

    @property
    def size(self) -> int:
        return 2 * self.n_u + self.n_p

    def dirichlet_vector(self, wall_speed: float) -> np.ndarray:
        """
        Valeurs imposées du repère de la sphère.

        Sphere : u = 0 ; SideWall/Top/Bottom : u = U e_z ; Axis : u_r = 0 ;
        pression fixée à 0 au nœud 0.
        """
        values = np.zeros(self.size)
        for tag in (BoundaryTag.SIDEWALL, BoundaryTag.TOP, BoundaryTag.BOTTOM):
            values[self.n_u + self.mesh.tagged_p2_nodes(tag)] = wall_speed
        return values

    def solve(self, rhs: np.ndarray, bc_values: np.ndarray, max_refinements: int = 3) -> np.ndarray:
        """
        Résout le système complet avec élimination des ddl de Dirichlet.

        Args:
            rhs (np.ndarray): Second membre (taille ``size``).
            bc_values (np.ndarray): Vecteur dont seules les composantes de Dirichlet sont lues.

        Returns:
            np.ndarray: Solution complète.

        Raises:
            SolverError: résidu relatif supérieur à ``Config.SOLVER_RTOL``.
        """
        x = np.zeros(self.size)
        x[self.dirichlet] = bc_values[self.dirichlet]
        b = rhs[self.free] - self.coupling @ x[self.dirichlet]
        norm_b = float(np.linalg.norm(b))
        if norm_b == 0.0:
            return x

        x_f = self.lu.solve(b)
        residual = np.inf
        for _ in range(max_refinements + 1):
            r = b - self.free_block @ x_f
            residual = float(np.linalg.norm(r)) / norm_b
            if residual <= config.SOLVER_RTOL:
                break
            x_f = x_f + self.lu.solve(r)
        else:
            logger.error(f"❌ Résidu du solveur {residual:.3e} après raffinement itératif")
            raise SolverError(config.ERROR_MESSAGES["solver_error"].format(residual=residual), residual=residual)

        x[self.free] = x_f
        return x

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Sépare une solution complète en (u (nU, 2), p (nV,))."""
        n = self.n_u
        return np.column_stack([x[:n], x[n:2 * n]]), x[2 * n:].copy()

    def refactored(self) -> "MomentumOperator":
        """Copie avec une nouvelle factorisation de la même matrice."""
        lu = _factor(self.free_block)
        return MomentumOperator(**{**self.__dict__, "lu": lu})


def _factor(matrix: sp.csc_matrix):
    try:
        return splu(matrix, permc_spec=config.PERMC_SPEC)
    except RuntimeError as e:
        logger.error(f"❌ Factorisation impossible : {e}")
        raise SolverError(config.ERROR_MESSAGES["singular_operator"].format(detail=e)) from e


def _scatter(dofs_rows: np.ndarray, dofs_cols: np.ndarray, local: np.ndarray, shape) -> sp.csr_matrix:
    rows = np.broadcast_to(dofs_rows[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(dofs_cols[:, None, :], local.shape).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()


def assemble_matrices(m: TriMesh) -> Dict[str, object]:
    """
    Matrices élémentaires pondérées par r, assemblées globalement.

    Returns:
        Dict[str, object]: mass, stiffness, hoop (nU × nU), d_r, d_z, t_rz
        (nU × nV) et lumped_p1 (nV,).
    """
    n_u = m.n_vertices + m.n_edges
    n_t = m.n_triangles
    corners = m.vertices[m.triangles]
    grad_lam = lambda_gradients(m)
    area = m.areas

    M = np.zeros((n_t, 6, 6))
    K = np.zeros((n_t, 6, 6))
    H = np.zeros((n_t, 6, 6))
    Dr = np.zeros((n_t, 6, 3))
    Dz = np.zeros((n_t, 6, 3))
    T = np.zeros((n_t, 6, 3))
    lumped = np.zeros((n_t, 3))

    for lam, w in zip(QUAD_POINTS, QUAD_WEIGHTS):
        r = corners[:, :, 0] @ lam
        wa = w * area
        N = p2_values(lam)
        gradN = np.einsum("ai,tik->tak", p2_lambda_derivatives(lam), grad_lam)
        NN = np.outer(N, N)
        M += (wa * r)[:, None, None] * NN
        H += (wa / r)[:, None, None] * NN
        K += (wa * r)[:, None, None] * np.einsum("tak,tbk->tab", gradN, gradN)
        Dr += (wa * r)[:, None, None] * gradN[:, :, 0][:, :, None] * lam[None, None, :]
        Dz += (wa * r)[:, None, None] * gradN[:, :, 1][:, :, None] * lam[None, None, :]
        T += wa[:, None, None] * np.outer(N, lam)[None, :, :]
        lumped += (wa * r)[:, None] * lam[None, :]

    dofs = m.p2_dofs
    tris = m.triangles
    return {
        "mass": _scatter(dofs, dofs, M, (n_u, n_u)),
        "stiffness": _scatter(dofs, dofs, K, (n_u, n_u)),
        "hoop": _scatter(dofs, dofs, H, (n_u, n_u)),
        "d_r": _scatter(dofs, tris, Dr, (n_u, m.n_vertices)),
        "d_z": _scatter(dofs, tris, Dz, (n_u, m.n_vertices)),
        "t_rz": _scatter(dofs, tris, T, (n_u, m.n_vertices)),
        "lumped_p1": np.bincount(tris.ravel(), weights=lumped.ravel(), minlength=m.n_vertices),
    }


def _dirichlet_dofs(m: TriMesh) -> np.ndarray:
    n_u = m.n_vertices + m.n_edges
    radial = [m.tagged_p2_nodes(tag) for tag in BoundaryTag]
    axial = [m.tagged_p2_nodes(tag) for tag in BoundaryTag if tag is not BoundaryTag.AXIS]
    dofs = np.concatenate(radial + [n_u + d for d in axial] + [np.array([2 * n_u])])
    return np.unique(dofs)


def assemble_momentum_operator(m: TriMesh, p: JsParams, h_t: float) -> MomentumOperator:
    """
    Assemble et factorise l'opérateur de point-selle.

    [[σM + μ_s(K + H), 0, B_rᵀ], [0, σM + μ_s K, B_zᵀ], [B_r, B_z, 0]], σ = Re/h_t,
    B_r = −(D_r + T)ᵀ, B_z = −D_zᵀ. Le ddl de pression 0 est fixé.

    Raises:
        SolverError: opérateur singulier (aucune condition de Dirichlet en vitesse).
    """
    mats = assemble_matrices(m)
    sigma = p.Re / h_t
    mu_s = p.mu_s
    A_r = sigma * mats["mass"] + mu_s * (mats["stiffness"] + mats["hoop"])
    A_z = sigma * mats["mass"] + mu_s * mats["stiffness"]
    B_r = -(mats["d_r"] + mats["t_rz"]).T
    B_z = -mats["d_z"].T
    saddle = sp.bmat([[A_r, None, B_r.T], [None, A_z, B_z.T], [B_r, B_z, None]], format="csr")

    n_u = m.n_vertices + m.n_edges
    dirichlet = _dirichlet_dofs(m)
    if np.count_nonzero(dirichlet < 2 * n_u) == 0:
        raise SolverError(config.ERROR_MESSAGES["singular_operator"].format(detail="aucune vitesse imposée"))
    free = np.setdiff1d(np.arange(saddle.shape[0]), dirichlet)

    free_block = saddle[free][:, free].tocsc()
    coupling = saddle[free][:, dirichlet].tocsr()
    lu = _factor(free_block)

    logger.info(
        f"{config.SUCCESS_MESSAGES['operator_ready']} : {saddle.shape[0]} inconnues, {free.size} libres"
    )
    return MomentumOperator(
        mesh=m,
        params=p,
        h_t=h_t,
        sigma=sigma,
        mass=mats["mass"],
        stiffness=mats["stiffness"],
        hoop=mats["hoop"],
        d_r=mats["d_r"],
        d_z=mats["d_z"],
        t_rz=mats["t_rz"],
        lumped_p1=mats["lumped_p1"],
        saddle=saddle,
        dirichlet=dirichlet,
        free=free,
        lu=lu,
        coupling=coupling,
        free_block=free_block,
    )


# --------------------------- Seconds membres ---------------------------

def conformation_load(opr: MomentumOperator, c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Divergence faible de c : (f_r, f_z) sur les ddl de vitesse."""
    f_r = -(opr.d_r @ c[:, RR] + opr.d_z @ c[:, RZ] + opr.t_rz @ c[:, TT])
    f_z = -(opr.d_r @ c[:, RZ] + opr.d_z @ c[:, ZZ])
    return f_r, f_z


def assemble_load(opr: MomentumOperator, f_r: Callable, f_z: Callable) -> np.ndarray:
    """
    Second membre ∫ f·v r pour une force volumique analytique f(r, z).

    Returns:
        np.ndarray: Vecteur complet (taille ``opr.size``), nul sur la pression.
    """
    m = opr.mesh
    corners = m.vertices[m.triangles]
    b_r = np.zeros((m.n_triangles, 6))
    b_z = np.zeros((m.n_triangles, 6))
    for lam, w in zip(QUAD_POINTS, QUAD_WEIGHTS):
        x = np.einsum("i,tik->tk", lam, corners)
        wr = w * m.areas * x[:, 0]
        N = p2_values(lam)
        b_r += (wr * f_r(x[:, 0], x[:, 1]))[:, None] * N[None, :]
        b_z += (wr * f_z(x[:, 0], x[:, 1]))[:, None] * N[None, :]
    rhs = np.zeros(opr.size)
    rhs[: opr.n_u] = np.bincount(m.p2_dofs.ravel(), weights=b_r.ravel(), minlength=opr.n_u)
    rhs[opr.n_u: 2 * opr.n_u] = np.bincount(m.p2_dofs.ravel(), weights=b_z.ravel(), minlength=opr.n_u)
    return rhs


# --------------------------- Interpolation ---------------------------

def interpolate_p2(m: TriMesh, values: np.ndarray, loc: PointLocations) -> np.ndarray:
    """Valeurs P2 (nU, …) évaluées aux points localisés."""
    N = p2_values(loc.bary)
    return np.einsum("na,na...->n...", N, values[m.p2_dofs[loc.element]])


def interpolate_p1(m: TriMesh, values: np.ndarray, loc: PointLocations) -> np.ndarray:
    """Valeurs P1 (nV, …) évaluées aux points localisés, coordonnées tronquées à [0, 1]."""
    lam = np.clip(loc.bary, 0.0, None)
    lam /= lam.sum(axis=1, keepdims=True)
    return np.einsum("na,na...->n...", lam, values[m.triangles[loc.element]])


def backtrack_feet(m: TriMesh, u_old: np.ndarray, h_t: float) -> Feet:
    """
    Pieds des caractéristiques par le schéma du point milieu.

    y* = X − h_t u(X), y = X − h_t u(½(X + y*)). Les pieds hors du domaine sont
    projetés sur le bord.
    """
    X = m.p2_nodes
    predictor = X - h_t * u_old
    midpoint = locate_points(m, 0.5 * (X + predictor))
    u_mid = interpolate_p2(m, u_old, midpoint)
    feet = X - h_t * u_mid
    loc = locate_points(m, feet)
    if not np.all(loc.inside):
        logger.debug(f"🔍 {int(np.count_nonzero(~loc.inside))} pied(s) projeté(s) sur le bord")
    return Feet(points=loc.points, locations=loc)


def vertex_locations(loc: PointLocations, n_vertices: int) -> PointLocations:
    return PointLocations(
        element=loc.element[:n_vertices],
        bary=loc.bary[:n_vertices],
        inside=loc.inside[:n_vertices],
        points=loc.points[:n_vertices],
    )


def interpolate_at_feet(m: TriMesh, state_old: FieldState, feet: Feet) -> Tuple[np.ndarray, np.ndarray]:
    """
    (u∘y aux nœuds P2, c∘y aux sommets).

    L'interpolation linéaire de c reste SPD dès que les valeurs aux sommets le sont.
    """
    u_foot = interpolate_p2(m, state_old.u, feet.locations)
    c_foot = interpolate_p1(m, state_old.c, vertex_locations(feet.locations, m.n_vertices))
    return u_foot, c_foot


# --------------------------- Pas de temps ---------------------------

def solve_momentum_step(opr: MomentumOperator, state_old: FieldState, u_foot: np.ndarray,
                        dU_old: float, U_bc: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Résout le système de quantité de mouvement du pas.

    Second membre : (Re/h_t) M u∘y, divergence faible de c_old et force
    d'entraînement Re (d_t U)_old e_z.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (u_new (nU, 2), p_new (nV,)).
    """
    f_r, f_z = conformation_load(opr, state_old.c)
    rhs = np.zeros(opr.size)
    n = opr.n_u
    rhs[:n] = opr.sigma * (opr.mass @ u_foot[:, 0]) + f_r
    rhs[n:2 * n] = opr.sigma * (opr.mass @ u_foot[:, 1]) + f_z + opr.params.Re * dU_old * (opr.mass @ np.ones(n))
    x = opr.solve(rhs, opr.dirichlet_vector(U_bc))
    return opr.split(x)


def divergence_residual(opr: MomentumOperator, u: np.ndarray) -> float:
    """Norme de la divergence discrète B u, hors ddl de pression fixé."""
    B_u = -((opr.d_r + opr.t_rz).T @ u[:, 0] + opr.d_z.T @ u[:, 1])
    return float(np.linalg.norm(B_u[1:]))


def nodal_velocity_gradient(opr: MomentumOperator, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Projection L² à masse condensée de ∇u sur les sommets.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (L (nV, 2, 2) avec L_ij = ∂u_i/∂x_j, u_r/r (nV,)).
    """
    inv_m = 1.0 / opr.lumped_p1
    L = np.empty((opr.n_p, 2, 2))
    L[:, 0, 0] = (opr.d_r.T @ u[:, 0]) * inv_m
    L[:, 0, 1] = (opr.d_z.T @ u[:, 0]) * inv_m
    L[:, 1, 0] = (opr.d_r.T @ u[:, 1]) * inv_m
    L[:, 1, 1] = (opr.d_z.T @ u[:, 1]) * inv_m
    hoop = (opr.t_rz.T @ u[:, 0]) * inv_m
    return L, hoop


def advance_conformation_field(opr: MomentumOperator, c_foot: np.ndarray, u_new: np.ndarray,
                               p: JsParams, h_t: float) -> np.ndarray:
    """
    Nouvelle conformation nodale : gradient projeté puis pas de Lyapunov par sommet.

    Raises:
        StepTooLargeError, PositivityLossError: propagées depuis le noyau tensoriel.
    """
    L, hoop = nodal_velocity_gradient(opr, u_new)
    return lyapunov_step_batch(c_foot, L, hoop, p, h_t)


# --------------------------- Évaluations ---------------------------

def velocity_gradient_at(m: TriMesh, u: np.ndarray, elements: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """∇u exact (P2) dans les éléments donnés, forme (n, 2, 2)."""
    grads = p2_gradients(m, elements, bary)
    values = u[m.p2_dofs[elements]]
    return np.einsum("nai,nak->nik", values, grads)


def velocity_l2_error(opr: MomentumOperator, u: np.ndarray, exact: Callable) -> float:
    """‖u_h − u‖ en norme L² pondérée par r ; ``exact(r, z)`` renvoie (u_r, u_z)."""
    m = opr.mesh
    corners = m.vertices[m.triangles]
    total = 0.0
    for lam, w in zip(QUAD_POINTS, QUAD_WEIGHTS):
        x = np.einsum("i,tik->tk", lam, corners)
        N = p2_values(lam)
        uh = np.einsum("a,tak->tk", N, u[m.p2_dofs])
        ur, uz = exact(x[:, 0], x[:, 1])
        err2 = (uh[:, 0] - ur) ** 2 + (uh[:, 1] - uz) ** 2
        total += float(np.sum(w * m.areas * x[:, 0] * err2))
    return float(np.sqrt(total))


if __name__ == "__main__":
    # Test du module
    from .mesh import build_sphere_in_cylinder

    print("Test du module fem...")
    params = JsParams(Re=0.0325, Wi=0.5, mu_s=0.999, xi=0.0)
    mesh = build_sphere_in_cylinder(4.115, 16.0, 0.25, 1.0)
    operator = assemble_momentum_operator(mesh, params, 1e-3)
    state = FieldState.at_rest(mesh, params)
    u, p = solve_momentum_step(operator, state, state.u, 0.0, 1.0)
    print(f"✅ max|u| = {np.abs(u).max():.4f}, divergence = {divergence_residual(operator, u):.2e}")
