"""
Maillage axisymétrique sphère-dans-cylindre.

Génération par le paquet ``triangle`` (PSLG du demi-plan méridien privé du
demi-disque unité), raffinement régulier 1 → 4, localisation de points par
grille régulière de cellules, intégrales curvilignes pondérées par r et
import/export au format texte.

Coordonnées (r, z) en rayons de sphère ; la sphère unité est centrée à l'origine
et z est orienté à l'opposé de la gravité.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Tuple, Union

import numpy as np
import triangle

from .config import config
from .errors import MeshError

logger = logging.getLogger(__name__)

# Arêtes locales d'un triangle (v0, v1), (v1, v2), (v2, v0)
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])

SPHERE_TOL = 1e-12
# Tolérance de localisation d'un point du cercle unité (sommets Sphere exacts)
SPHERE_LOCATE_TOL = 1e-9


class BoundaryTag(IntEnum):
    AXIS = 1
    SPHERE = 2
    SIDEWALL = 3
    TOP = 4
    BOTTOM = 5

    @classmethod
    def parse(cls, tag: Union["BoundaryTag", str, int]) -> "BoundaryTag":
        """Convertit un nom (``Sphere``, ``SIDEWALL``…) ou un entier en étiquette."""
        try:
            if isinstance(tag, BoundaryTag):
                return tag
            if isinstance(tag, str):
                return cls[tag.strip().upper()]
            return cls(int(tag))
        except (KeyError, ValueError) as e:
            raise MeshError(config.ERROR_MESSAGES["unknown_tag"].format(tag=tag)) from e


@dataclass(frozen=True)
class MeshPoint:
    element: int
    bary: Tuple[float, float, float]


@dataclass(frozen=True)
class Outside:
    """Point hors domaine : projection sur le bord le plus proche."""

    nearest: Tuple[float, float]
    location: MeshPoint


@dataclass
class PointLocations:
    """Résultat d'une localisation en lot."""

    element: np.ndarray
    bary: np.ndarray
    inside: np.ndarray
    points: np.ndarray


class SpatialIndex:
    """
    Grille régulière de cellules avec listes CSR de triangles candidats.

    Chaque triangle est inscrit dans toutes les cellules que recouvre sa boîte
    englobante ; la liste d'une cellule est donc complète.
    """

    def __init__(self, vertices: np.ndarray, triangles: np.ndarray, edge_lengths: np.ndarray):
        self.vertices = vertices
        self.triangles = triangles
        n_tri = triangles.shape[0]

        corners = vertices[triangles]
        lo = corners.min(axis=1)
        hi = corners.max(axis=1)
        self.origin = lo.min(axis=0)
        extent = hi.max(axis=0) - self.origin

        cell = config.LOCATE_CELL_FACTOR * float(np.percentile(edge_lengths, 5))
        # Limite la grille à quelques cellules par triangle
        cell = max(cell, math.sqrt(extent[0] * extent[1] / (4.0 * n_tri)))
        self.cell = cell
        self.shape = np.maximum(np.ceil(extent / cell).astype(int), 1)

        i0 = self._cell_coords(lo)
        i1 = self._cell_coords(hi)
        width = i1[:, 0] - i0[:, 0] + 1
        counts = width * (i1[:, 1] - i0[:, 1] + 1)
        tri_ids = np.repeat(np.arange(n_tri), counts)
        offset = np.arange(tri_ids.size) - np.repeat(np.cumsum(counts) - counts, counts)
        ix = i0[tri_ids, 0] + offset % width[tri_ids]
        iz = i0[tri_ids, 1] + offset // width[tri_ids]
        cell_ids = iz * self.shape[0] + ix

        order = np.argsort(cell_ids, kind="stable")
        self.cell_triangles = tri_ids[order]
        self.cell_ptr = np.concatenate(([0], np.cumsum(np.bincount(cell_ids, minlength=int(np.prod(self.shape))))))

        # Applications affines inverses par triangle
        p0 = corners[:, 0, :]
        jac = np.stack([corners[:, 1, :] - p0, corners[:, 2, :] - p0], axis=2)
        self.p0 = p0
        self.inv_jac = np.linalg.inv(jac)

    def _cell_coords(self, points: np.ndarray) -> np.ndarray:
        idx = np.floor((points - self.origin) / self.cell).astype(int)
        return np.clip(idx, 0, self.shape - 1)

    def barycentric(self, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
        local = np.einsum("nij,nj->ni", self.inv_jac[elements], points - self.p0[elements])
        return np.column_stack([1.0 - local[:, 0] - local[:, 1], local[:, 0], local[:, 1]])

    def locate(self, points: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        Triangle contenant chaque point (−1 si aucun) et coordonnées barycentriques.
        """
        n = points.shape[0]
        element = np.full(n, -1, dtype=int)
        bary = np.zeros((n, 3))

        raw = np.floor((points - self.origin) / self.cell).astype(int)
        in_grid = np.all((raw >= 0) & (raw < self.shape), axis=1)
        # Points sur la frontière supérieure de la grille
        on_edge = np.all((raw >= 0) & (raw <= self.shape), axis=1) & ~in_grid
        in_grid |= on_edge
        ij = np.clip(raw, 0, self.shape - 1)
        cells = ij[:, 1] * self.shape[0] + ij[:, 0]

        start = self.cell_ptr[cells]
        count = np.where(in_grid, self.cell_ptr[cells + 1] - start, 0)
        pending = count > 0
        k = 0
        while np.any(pending):
            idx = np.nonzero(pending & (k < count))[0]
            if idx.size == 0:
                break
            tri = self.cell_triangles[start[idx] + k]
            lam = self.barycentric(tri, points[idx])
            hit = np.all(lam >= -tol, axis=1)
            found = idx[hit]
            element[found] = tri[hit]
            bary[found] = lam[hit]
            pending[found] = False
            k += 1
        return element, bary


@dataclass(eq=False)
class TriMesh:
    """
    Triangulation conforme orientée positivement.

    Attributes:
        vertices (np.ndarray): Sommets (nV, 2) en (r, z).
        triangles (np.ndarray): Triangles (nT, 3), sens direct.
        edges (np.ndarray): Arêtes (nE, 2), indices triés.
        tri_edges (np.ndarray): Arêtes locales de chaque triangle (nT, 3).
        boundary_edges (np.ndarray): Indices des arêtes de bord.
        boundary_tags (np.ndarray): Étiquette de chaque arête de bord.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    edge_triangles: np.ndarray = field(repr=False)

    # --------------------------- Construction ---------------------------

    @classmethod
    def from_arrays(cls, vertices: np.ndarray, triangles: np.ndarray,
                    boundary_pairs: np.ndarray, boundary_tags: np.ndarray) -> "TriMesh":
        """
        Construit les tables d'arêtes et associe les étiquettes aux arêtes de bord.

        Raises:
            MeshError: triangulation non conforme ou arête de bord sans étiquette.
        """
        vertices = np.asarray(vertices, dtype=float)
        triangles = _orient(vertices, np.asarray(triangles, dtype=int))

        all_edges = np.sort(triangles[:, LOCAL_EDGES], axis=2).reshape(-1, 2)
        edges, inverse = np.unique(all_edges, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        tri_edges = inverse.reshape(-1, 3)
        counts = np.bincount(inverse, minlength=edges.shape[0])
        if np.any(counts > 2):
            raise MeshError(config.ERROR_MESSAGES["mesh_error"].format(detail="arête partagée par plus de deux triangles"))

        edge_triangles = np.full((edges.shape[0], 2), -1, dtype=int)
        owners = np.repeat(np.arange(triangles.shape[0]), 3)
        order = np.argsort(inverse, kind="stable")
        sorted_edges = inverse[order]
        first = np.ones(order.size, dtype=bool)
        first[1:] = sorted_edges[1:] != sorted_edges[:-1]
        edge_triangles[sorted_edges[first], 0] = owners[order[first]]
        edge_triangles[sorted_edges[~first], 1] = owners[order[~first]]

        boundary_edges = np.nonzero(counts == 1)[0]
        lookup: Dict[Tuple[int, int], int] = {
            (int(a), int(b)): int(t) for (a, b), t in zip(np.sort(np.asarray(boundary_pairs, dtype=int), axis=1), boundary_tags)
        }
        tags = np.zeros(boundary_edges.size, dtype=int)
        for i, e in enumerate(boundary_edges):
            key = (int(edges[e, 0]), int(edges[e, 1]))
            if key not in lookup:
                raise MeshError(
                    config.ERROR_MESSAGES["mesh_error"].format(detail=f"arête de bord {key} sans étiquette")
                )
            tags[i] = lookup[key]

        return cls(vertices, triangles, edges, tri_edges, boundary_edges, tags, edge_triangles)

    # --------------------------- Grandeurs dérivées ---------------------------

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def midpoints(self) -> np.ndarray:
        """Milieux des arêtes (nœuds P2 d'arête, sur les cordes)."""
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    @cached_property
    def p2_nodes(self) -> np.ndarray:
        """Nœuds P2 : sommets puis milieux d'arêtes."""
        return np.vstack([self.vertices, self.midpoints])

    @cached_property
    def p2_dofs(self) -> np.ndarray:
        """Table locale → globale P2 : [v0, v1, v2, m01, m12, m20]."""
        return np.hstack([self.triangles, self.n_vertices + self.tri_edges])

    @cached_property
    def areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.triangles)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def index(self) -> SpatialIndex:
        return SpatialIndex(self.vertices, self.triangles, self.edge_lengths)

    def tagged_edges(self, tag) -> np.ndarray:
        """Indices (dans ``edges``) des arêtes de bord portant l'étiquette."""
        tag = BoundaryTag.parse(tag)
        return self.boundary_edges[self.boundary_tags == int(tag)]

    def tagged_vertices(self, tag) -> np.ndarray:
        return np.unique(self.edges[self.tagged_edges(tag)])

    def tagged_p2_nodes(self, tag) -> np.ndarray:
        """Nœuds P2 (sommets et milieux) portés par les arêtes étiquetées."""
        edges = self.tagged_edges(tag)
        return np.concatenate([np.unique(self.edges[edges]), self.n_vertices + edges])

    def fingerprint(self) -> str:
        """Empreinte sha256 de la géométrie et de la connectivité."""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(self.triangles, dtype="<i8").tobytes())
        return digest.hexdigest()


# --------------------------- Outils géométriques ---------------------------

def _signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _orient(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    triangles = triangles.copy()
    flip = _signed_areas(vertices, triangles) < 0.0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return triangles


def size_field(points: np.ndarray, h_near: float, h_far: float) -> np.ndarray:
    """Taille cible h_near·(h_far/h_near)^min(d/3, 1), d = distance à la sphère."""
    d = np.maximum(np.hypot(points[..., 0], points[..., 1]) - 1.0, 0.0)
    return h_near * (h_far / h_near) ** np.minimum(d / 3.0, 1.0)


def _graded_curve(curve: Callable[[np.ndarray], np.ndarray], length: float,
                  h_near: float, h_far: float, samples: int = 4000) -> np.ndarray:
    """
    Discrétise une courbe paramétrée s ∈ [0, 1] selon le champ de taille.

    Returns:
        np.ndarray: Points (n+1, 2), extrémités incluses.
    """
    s = np.linspace(0.0, 1.0, samples)
    density = length / size_field(curve(s), h_near, h_far)
    cumulative = np.concatenate(([0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(s))))
    n = max(1, int(math.ceil(cumulative[-1])))
    targets = np.linspace(0.0, cumulative[-1], n + 1)
    return curve(np.interp(targets, cumulative, s))


def _segment(a, b) -> Tuple[Callable[[np.ndarray], np.ndarray], float]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (lambda s: a + np.outer(s, b - a)), float(np.hypot(*(b - a)))


def _sphere_arc(s: np.ndarray) -> np.ndarray:
    # Du pôle nord au pôle sud en passant par l'équateur
    theta = math.pi / 2.0 - math.pi * s
    pts = np.column_stack([np.cos(theta), np.sin(theta)])
    pts[np.isclose(s, 0.0), :] = (0.0, 1.0)
    pts[np.isclose(s, 1.0), :] = (0.0, -1.0)
    return pts


def _tag_by_geometry(vertices: np.ndarray, pairs: np.ndarray, alpha: float, z_min: float, z_max: float) -> np.ndarray:
    a = vertices[pairs[:, 0]]
    b = vertices[pairs[:, 1]]
    tol = 1e-9 * max(alpha, z_max - z_min)
    tags = np.zeros(pairs.shape[0], dtype=int)

    axis = (np.abs(a[:, 0]) <= tol) & (np.abs(b[:, 0]) <= tol)
    wall = (np.abs(a[:, 0] - alpha) <= tol) & (np.abs(b[:, 0] - alpha) <= tol)
    top = (np.abs(a[:, 1] - z_max) <= tol) & (np.abs(b[:, 1] - z_max) <= tol)
    bottom = (np.abs(a[:, 1] - z_min) <= tol) & (np.abs(b[:, 1] - z_min) <= tol)
    sphere = (np.abs(np.hypot(a[:, 0], a[:, 1]) - 1.0) <= 1e-9) & (np.abs(np.hypot(b[:, 0], b[:, 1]) - 1.0) <= 1e-9)

    tags[sphere] = BoundaryTag.SPHERE
    tags[bottom] = BoundaryTag.BOTTOM
    tags[top] = BoundaryTag.TOP
    tags[wall] = BoundaryTag.SIDEWALL
    tags[axis] = BoundaryTag.AXIS
    if np.any(tags == 0):
        raise MeshError(config.ERROR_MESSAGES["mesh_error"].format(detail="arête de bord non identifiée"))
    return tags


def _boundary_pairs(triangles: np.ndarray) -> np.ndarray:
    all_edges = np.sort(triangles[:, LOCAL_EDGES], axis=2).reshape(-1, 2)
    edges, counts = np.unique(all_edges, axis=0, return_counts=True)
    return edges[counts == 1]


# --------------------------- Génération ---------------------------

def build_sphere_in_cylinder(alpha: float, height: float = 16.0, h_near: float = 0.1,
                             h_far: float = 1.0, max_passes: int = 8) -> TriMesh:
    """
    Maillage gradué du cylindre r ∈ [0, alpha], |z| ≤ height/2 privé de la sphère unité.

    Args:
        alpha (float): Rapport d'aspect r_c / r_s (> 1).
        height (float): Hauteur totale (> 2).
        h_near (float): Taille d'arête cible sur la sphère.
        h_far (float): Taille d'arête cible à distance ≥ 3 rayons.
        max_passes (int): Nombre maximal de passes de raffinement en aire.

    Returns:
        TriMesh: Maillage étiqueté.

    Raises:
        MeshError: Géométrie ou tailles infaisables, arête hors d'un facteur 2 de la taille cible.
    """
    if alpha <= 1.0:
        raise MeshError(config.ERROR_MESSAGES["mesh_error"].format(detail=f"alpha={alpha} doit être > 1"))
    if height <= 2.0:
        raise MeshError(config.ERROR_MESSAGES["mesh_error"].format(detail=f"height={height} doit être > 2"))
    if not 0.0 < h_near <= h_far:
        raise MeshError(config.ERROR_MESSAGES["mesh_error"].format(detail="il faut 0 < h_near ≤ h_far"))
    if h_near > math.pi / 4.0:
        raise MeshError(
            config.ERROR_MESSAGES["mesh_error"].format(detail=f"h_near={h_near} dépasse la circonférence / 8")
        )

    z_top, z_bot = height / 2.0, -height / 2.0
    pieces = [
        _segment((0.0, z_bot), (0.0, -1.0)),
        None,
        _segment((0.0, 1.0), (0.0, z_top)),
        _segment((0.0, z_top), (alpha, z_top)),
        _segment((alpha, z_top), (alpha, z_bot)),
        _segment((alpha, z_bot), (0.0, z_bot)),
    ]

    loop: List[np.ndarray] = []
    for piece in pieces:
        if piece is None:
            # Arc parcouru du pôle sud au pôle nord
            pts = _graded_curve(_sphere_arc, math.pi, h_near, h_far)[::-1]
        else:
            pts = _graded_curve(piece[0], piece[1], h_near, h_far)
        loop.append(pts[:-1])
    boundary = np.vstack(loop)
    n_b = boundary.shape[0]
    segments = np.column_stack([np.arange(n_b), (np.arange(n_b) + 1) % n_b])

    far_area = math.sqrt(3.0) / 4.0 * h_far**2
    pslg = {"vertices": boundary, "segments": segments, "holes": np.array([[0.5, 0.0]])}
    tri = triangle.triangulate(pslg, f"pq30Ya{far_area:.10f}")

    for _ in range(max_passes):
        verts = tri["vertices"]
        tris = tri["triangles"]
        centroids = verts[tris].mean(axis=1)
        target = math.sqrt(3.0) / 4.0 * size_field(centroids, h_near, h_far) ** 2
        areas = np.abs(_signed_areas(verts, tris))
        corners = verts[tris]
        lengths = np.linalg.norm(corners[:, [1, 2, 0]] - corners, axis=2)
        h_vertex = size_field(corners, h_near, h_far)
        h_edge = np.maximum(h_vertex, h_vertex[:, [1, 2, 0]])
        too_big = (areas > 1.5 * target) | np.any(lengths > 1.8 * h_edge, axis=1)
        if not np.any(too_big):
            break
        refine_input = {
            "vertices": verts,
            "triangles": tris,
            "segments": tri["segments"],
            "holes": pslg["holes"],
            "triangle_max_area": np.where(too_big, np.minimum(target, 0.5 * areas), -1.0).reshape(-1, 1),
        }
        tri = triangle.triangulate(refine_input, "rpq30Ya")

    vertices = np.array(tri["vertices"], dtype=float)
    triangles = np.array(tri["triangles"], dtype=int)
    pairs = _boundary_pairs(triangles)
    tags = _tag_by_geometry(vertices, pairs, alpha, z_bot, z_top)
    mesh = TriMesh.from_arrays(vertices, triangles, pairs, tags)
    check_mesh(mesh)
    check_grading(mesh, h_near, h_far)
    logger.info(
        f"{config.SUCCESS_MESSAGES['mesh_ready']} : {mesh.n_vertices} sommets, {mesh.n_triangles} triangles"
    )
    return mesh


def graded_edge_ratios(m: TriMesh, h_near: float, h_far: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rapports longueur / taille cible de chaque arête.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (ℓ / min(h_a, h_b), ℓ / max(h_a, h_b)) où h_a, h_b
        sont les tailles cibles aux extrémités.
    """
    h = size_field(m.vertices[m.edges], h_near, h_far)
    return m.edge_lengths / h.min(axis=1), m.edge_lengths / h.max(axis=1)


def check_grading(m: TriMesh, h_near: float, h_far: float, factor: float = 2.0) -> None:
    """
    Vérifie que chaque arête est à un facteur ``factor`` près de la taille cible.

    Raises:
        MeshError: arête trop courte ou trop longue.
    """
    vs_min, vs_max = graded_edge_ratios(m, h_near, h_far)
    short = np.count_nonzero(vs_min < 1.0 / factor)
    long = np.count_nonzero(vs_max > factor)
    if short or long:
        raise MeshError(
            config.ERROR_MESSAGES["mesh_error"].format(
                detail=f"{short} arête(s) trop courte(s), {long} trop longue(s) pour la taille cible"
            )
        )


def build_rectangle(r_min: float, r_max: float, z_min: float, z_max: float, nr: int, nz: int) -> TriMesh:
    """
    Maillage structuré d'un rectangle méridien.

    Le côté r = 0 est étiqueté Axis, un côté r = r_min > 0 est étiqueté SideWall
    comme le côté r = r_max.
    """
    if r_min < 0.0 or r_max <= r_min or z_max <= z_min or nr < 1 or nz < 1:
        raise MeshError(config.ERROR_MESSAGES["mesh_error"].format(detail="rectangle invalide"))
    r = np.linspace(r_min, r_max, nr + 1)
    z = np.linspace(z_min, z_max, nz + 1)
    rr, zz = np.meshgrid(r, z)
    vertices = np.column_stack([rr.ravel(), zz.ravel()])

    ids = np.arange((nr + 1) * (nz + 1)).reshape(nz + 1, nr + 1)
    a = ids[:-1, :-1].ravel()
    b = ids[:-1, 1:].ravel()
    c = ids[1:, 1:].ravel()
    d = ids[1:, :-1].ravel()
    triangles = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])

    pairs = _boundary_pairs(triangles)
    pa, pb = vertices[pairs[:, 0]], vertices[pairs[:, 1]]
    tags = np.full(pairs.shape[0], int(BoundaryTag.SIDEWALL))
    tags[(pa[:, 1] == z_min) & (pb[:, 1] == z_min)] = BoundaryTag.BOTTOM
    tags[(pa[:, 1] == z_max) & (pb[:, 1] == z_max)] = BoundaryTag.TOP
    if r_min == 0.0:
        tags[(pa[:, 0] == 0.0) & (pb[:, 0] == 0.0)] = BoundaryTag.AXIS
    return TriMesh.from_arrays(vertices, triangles, pairs, tags)


def refine_regular(m: TriMesh) -> TriMesh:
    """
    Raffinement régulier : chaque triangle est découpé en 4.

    Les nouveaux sommets sont les milieux d'arêtes ; ceux des arêtes Sphere sont
    projetés sur le cercle unité. Les arêtes filles héritent de l'étiquette de
    l'arête mère.
    """
    n_v = m.n_vertices
    mid = m.midpoints.copy()
    sphere_edges = m.tagged_edges(BoundaryTag.SPHERE)
    if sphere_edges.size:
        pts = mid[sphere_edges]
        mid[sphere_edges] = pts / np.hypot(pts[:, 0], pts[:, 1])[:, None]
    vertices = np.vstack([m.vertices, mid])

    t = m.triangles
    m01, m12, m20 = (n_v + m.tri_edges[:, i] for i in range(3))
    triangles = np.vstack(
        [
            np.column_stack([t[:, 0], m01, m20]),
            np.column_stack([t[:, 1], m12, m01]),
            np.column_stack([t[:, 2], m20, m12]),
            np.column_stack([m01, m12, m20]),
        ]
    )

    parent = m.edges[m.boundary_edges]
    middle = n_v + m.boundary_edges
    pairs = np.vstack([np.column_stack([parent[:, 0], middle]), np.column_stack([middle, parent[:, 1]])])
    tags = np.concatenate([m.boundary_tags, m.boundary_tags])

    refined = TriMesh.from_arrays(vertices, triangles, pairs, tags)
    logger.info(f"🔧 Raffinement régulier : {m.n_triangles} → {refined.n_triangles} triangles")
    return refined


def check_mesh(m: TriMesh) -> None:
    """
    Vérifie les invariants du maillage.

    Raises:
        MeshError: au premier invariant violé.
    """
    problems = []
    if np.any(m.vertices[:, 0] < 0.0):
        problems.append("sommet avec r < 0")
    if np.any(m.areas <= 0.0):
        problems.append("triangle d'aire non positive")
    axis = m.tagged_vertices(BoundaryTag.AXIS)
    if axis.size and np.any(m.vertices[axis, 0] != 0.0):
        problems.append("sommet Axis avec r ≠ 0")
    sphere = m.tagged_vertices(BoundaryTag.SPHERE)
    if sphere.size:
        radius2 = np.sum(m.vertices[sphere] ** 2, axis=1)
        if np.any(np.abs(radius2 - 1.0) > SPHERE_TOL):
            problems.append("sommet Sphere hors du cercle unité")
    if problems:
        raise MeshError(config.ERROR_MESSAGES["mesh_error"].format(detail=", ".join(problems)))


# --------------------------- Localisation ---------------------------

def _project_to_boundary(m: TriMesh, points: np.ndarray, chunk: int = 2048) -> Tuple[np.ndarray, np.ndarray]:
    """
    Projection de chaque point sur l'arête de bord la plus proche.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (projections (N, 2), position (N,) dans ``boundary_edges``).
    """
    a = m.vertices[m.edges[m.boundary_edges, 0]]
    d = m.vertices[m.edges[m.boundary_edges, 1]] - a
    length2 = np.sum(d**2, axis=1)
    projected = np.empty_like(points)
    nearest = np.empty(points.shape[0], dtype=int)
    for start in range(0, points.shape[0], chunk):
        x = points[start:start + chunk, None, :]
        s = np.clip(np.sum((x - a) * d, axis=2) / length2, 0.0, 1.0)
        q = a + s[:, :, None] * d
        j = np.argmin(np.sum((q - x) ** 2, axis=2), axis=1)
        projected[start:start + chunk] = q[np.arange(j.size), j]
        nearest[start:start + chunk] = j
    return projected, nearest


def locate_points(m: TriMesh, points: np.ndarray) -> PointLocations:
    """
    Localise un lot de points.

    Les points hors du domaine sont remplacés par leur projection sur le bord ;
    ``inside`` vaut False pour eux et ``points`` contient les projections. Un
    point dont le bord le plus proche est la sphère est projeté radialement sur
    le cercle unité.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    element, bary = m.index.locate(points, config.LOCATE_TOL)
    inside = element >= 0
    located = points.copy()

    outside = np.nonzero(~inside)[0]
    if outside.size:
        projected, nearest = _project_to_boundary(m, points[outside])
        owner = m.edge_triangles[m.boundary_edges[nearest], 0]
        lam = np.clip(m.index.barycentric(owner, projected), 0.0, None)
        lam /= lam.sum(axis=1, keepdims=True)

        on_sphere = m.boundary_tags[nearest] == int(BoundaryTag.SPHERE)
        if np.any(on_sphere):
            x = points[outside[on_sphere]]
            rho = np.hypot(x[:, 0], x[:, 1])
            radial = np.where(rho[:, None] > 0.0, x / np.where(rho > 0.0, rho, 1.0)[:, None], (1.0, 0.0))
            radial[:, 0] = np.abs(radial[:, 0])
            # Entre corde et arc le point radial est dans le maillage
            tri, lam_r = m.index.locate(radial, SPHERE_LOCATE_TOL)
            found = tri >= 0
            rows = np.nonzero(on_sphere)[0][found]
            projected[rows] = radial[found]
            owner[rows] = tri[found]
            lam_r = np.clip(lam_r[found], 0.0, None)
            lam[rows] = lam_r / lam_r.sum(axis=1, keepdims=True)

        element[outside] = owner
        bary[outside] = lam
        located[outside] = projected
    return PointLocations(element=element, bary=bary, inside=inside, points=located)


def locate_point(m: TriMesh, point: Iterable[float]) -> Union[MeshPoint, Outside]:
    """Localise un point : MeshPoint s'il est dans le domaine, sinon Outside."""
    loc = locate_points(m, np.asarray(point, dtype=float)[None, :])
    mesh_point = MeshPoint(int(loc.element[0]), tuple(float(v) for v in loc.bary[0]))
    if loc.inside[0]:
        return mesh_point
    return Outside(nearest=(float(loc.points[0, 0]), float(loc.points[0, 1])), location=mesh_point)


# --------------------------- Intégrales de bord ---------------------------

def boundary_line_integral(m: TriMesh, tag, integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
                           order: int = 3) -> float:
    """
    ∫ integrand · r dℓ sur les arêtes étiquetées (Gauss-Legendre à ``order`` points par arête).

    Args:
        m (TriMesh): Maillage.
        tag: Étiquette (BoundaryTag ou nom).
        integrand: f(points (N, 2), edge_ids (N,)) -> valeurs (N,).

    Raises:
        MeshError: étiquette inconnue.
    """
    edges = m.tagged_edges(tag)
    if edges.size == 0:
        return 0.0
    nodes, weights = np.polynomial.legendre.leggauss(order)
    s = 0.5 * (nodes + 1.0)
    a = m.vertices[m.edges[edges, 0]]
    b = m.vertices[m.edges[edges, 1]]
    points = (a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]).reshape(-1, 2)
    edge_ids = np.repeat(edges, order)
    values = np.asarray(integrand(points, edge_ids), dtype=float).reshape(-1, order)
    r = points[:, 0].reshape(-1, order)
    length = np.hypot(*(b - a).T)
    return float(np.sum(0.5 * length * np.sum(weights * values * r, axis=1)))


# --------------------------- Export / import ---------------------------

def mesh_report(m: TriMesh) -> Dict[str, object]:
    """Statistiques du maillage : effectifs, tailles d'arêtes, angle minimal, arêtes par étiquette."""
    p = m.vertices[m.triangles]
    angles = []
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        cos = np.sum(u * v, axis=1) / (np.hypot(*u.T) * np.hypot(*v.T))
        angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
    report: Dict[str, object] = {
        "n_vertices": m.n_vertices,
        "n_triangles": m.n_triangles,
        "n_edges": m.n_edges,
        "h_min": float(m.edge_lengths.min()),
        "h_max": float(m.edge_lengths.max()),
        "min_angle_deg": float(np.min(angles)),
        "area": float(m.areas.sum()),
    }
    for tag in BoundaryTag:
        report[f"edges_{tag.name.lower()}"] = int(np.count_nonzero(m.boundary_tags == int(tag)))
    return report


def write_mesh_text(m: TriMesh, path: Path) -> None:
    """
    Format texte : en-tête, sommets, triangles, arêtes de bord étiquetées.

    ```
    # trimesh 1
    vertices <n>
    <r> <z>
    triangles <n>
    <i> <j> <k>
    boundary <n>
    <i> <j> <TAG>
    ```
    """
    path = Path(path)
    lines = ["# trimesh 1", f"vertices {m.n_vertices}"]
    lines += [f"{r!r} {z!r}" for r, z in m.vertices.tolist()]
    lines.append(f"triangles {m.n_triangles}")
    lines += [f"{a} {b} {c}" for a, b, c in m.triangles.tolist()]
    lines.append(f"boundary {m.boundary_edges.size}")
    for e, tag in zip(m.boundary_edges, m.boundary_tags):
        a, b = m.edges[e]
        lines.append(f"{a} {b} {BoundaryTag(int(tag)).name}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mesh_text(path: Path) -> TriMesh:
    """
    Relit un maillage écrit par ``write_mesh_text``.

    Raises:
        MeshError: fichier mal formé.
    """
    try:
        rows = [line.split() for line in Path(path).read_text(encoding="utf-8").splitlines()
                if line.strip() and not line.startswith("#")]
        pos = 0

        def block(name: str) -> List[List[str]]:
            nonlocal pos
            if rows[pos][0] != name:
                raise ValueError(f"section '{name}' attendue")
            n = int(rows[pos][1])
            out = rows[pos + 1: pos + 1 + n]
            pos += n + 1
            return out

        vertices = np.array(block("vertices"), dtype=float)
        triangles = np.array(block("triangles"), dtype=int)
        boundary = block("boundary")
        pairs = np.array([[int(a), int(b)] for a, b, _ in boundary], dtype=int)
        tags = np.array([int(BoundaryTag.parse(t)) for _, _, t in boundary], dtype=int)
    except (IndexError, ValueError) as e:
        raise MeshError(config.ERROR_MESSAGES["mesh_error"].format(detail=f"fichier {path} illisible : {e}")) from e
    mesh = TriMesh.from_arrays(vertices, triangles, pairs, tags)
    check_mesh(mesh)
    return mesh


if __name__ == "__main__":
    # Test du module
    print("Test du module mesh...")
    mesh = build_sphere_in_cylinder(4.115, 16.0, 0.2, 1.0)
    for key, value in mesh_report(mesh).items():
        print(f"  {key}: {value}")
    print(f"∫ r dℓ sur la sphère = {boundary_line_integral(mesh, 'Sphere', lambda x, e: np.ones(len(x))):.5f}")
