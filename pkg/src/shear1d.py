"""
Écoulement de Couette plan transitoire d'un fluide JS sur une grille 1-D.

La vitesse v(y) vit aux nœuds (v(0) = 0, v(1) = vitesse de paroi), le taux de
cisaillement et la conformation aux centres des mailles. L'équation
Re ∂_t v = ∂_y(μ_s ∂_y v + c_xy) est avancée avec diffusion implicite
(système tridiagonal) et contrainte élastique explicite, puis la conformation
est mise à jour maille par maille par le noyau de Lyapunov.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import solve_banded

from .config import config
from .errors import InvalidParameterError, NotSteadyError
from .params import JsParams
from .rheology import classify_curve, stress_to_shear_rates
from .tensor_core import RR, RZ, ZZ, equilibrium_array, lyapunov_step_batch

logger = logging.getLogger(__name__)

DEFAULT_RE_CHANNEL = 1e-2


@dataclass(frozen=True)
class Channel1D:
    """
    État du canal : vitesses nodales et conformations par maille.

    Les colonnes de ``c`` suivent la convention [xx, xy, yy, zz] du noyau
    tensoriel (la composante hors plan reste à l'équilibre).
    """

    n_nodes: int
    wall_speed: float
    Re_channel: float
    v: np.ndarray
    c: np.ndarray
    t: float = 0.0

    @classmethod
    def at_rest(cls, n_nodes: int, wall_speed: float, p: JsParams,
                Re_channel: float = DEFAULT_RE_CHANNEL) -> "Channel1D":
        """
        Canal au repos, paroi supérieure mise en mouvement impulsivement.

        Args:
            n_nodes (int): Nombre de nœuds de vitesse (≥ 3).
            wall_speed (float): Vitesse de la paroi supérieure.
            p (JsParams): Paramètres du modèle.
            Re_channel (float): Coefficient d'inertie (> 0).
        """
        if n_nodes < 3:
            raise InvalidParameterError(
                config.ERROR_MESSAGES["invalid_parameter"].format(detail="n_nodes doit être ≥ 3")
            )
        if Re_channel <= 0.0:
            raise InvalidParameterError(
                config.ERROR_MESSAGES["invalid_parameter"].format(detail="Re_channel doit être > 0")
            )
        v = np.zeros(n_nodes)
        v[-1] = wall_speed
        return cls(n_nodes, float(wall_speed), float(Re_channel), v, equilibrium_array(p, n_nodes - 1))

    @property
    def dy(self) -> float:
        return 1.0 / (self.n_nodes - 1)

    @property
    def y_nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_nodes)

    @property
    def y_cells(self) -> np.ndarray:
        return (np.arange(self.n_nodes - 1) + 0.5) * self.dy

    def shear_rates(self) -> np.ndarray:
        """Taux de cisaillement κ par maille."""
        return np.diff(self.v) / self.dy

    def total_stress(self, p: JsParams) -> np.ndarray:
        """Contrainte totale σ = μ_s κ + τ_xy par maille."""
        return p.mu_s * self.shear_rates() + self.c[:, RZ]


@dataclass(frozen=True)
class Band:
    kappa: float
    width: float
    y_start: float
    y_end: float
    n_cells: int
    branch: str


@dataclass
class BandReport:
    """Bandes détectées dans un état stationnaire."""

    bands: List[Band]
    sigma_total: float
    stress_spread: float
    lever_mean_kappa: float
    ignored_cells: int = 0
    roots: List[float] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "kappa": b.kappa,
                    "width": b.width,
                    "y_start": b.y_start,
                    "y_end": b.y_end,
                    "n_cells": b.n_cells,
                    "branch": b.branch,
                    "sigma_total": self.sigma_total,
                }
                for b in self.bands
            ],
            columns=["kappa", "width", "y_start", "y_end", "n_cells", "branch", "sigma_total"],
        )


def _tridiagonal(ch: Channel1D, p: JsParams, h_t: float) -> np.ndarray:
    n_int = ch.n_nodes - 2
    k = p.mu_s / ch.dy**2
    ab = np.zeros((3, n_int))
    ab[0, 1:] = -k
    ab[1, :] = ch.Re_channel / h_t + 2.0 * k
    ab[2, :-1] = -k
    return ab


def step_channel(ch: Channel1D, p: JsParams, h_t: float) -> Channel1D:
    """
    Avance le canal d'un pas de temps.

    Returns:
        Channel1D: Nouvel état (conditions aux limites réimposées).

    Raises:
        PositivityLossError: propagée depuis le noyau tensoriel.
    """
    k = p.mu_s / ch.dy**2
    tau = ch.c[:, RZ]

    rhs = ch.Re_channel / h_t * ch.v[1:-1] + (tau[1:] - tau[:-1]) / ch.dy
    rhs[-1] += k * ch.wall_speed

    v_new = np.empty_like(ch.v)
    v_new[0] = 0.0
    v_new[-1] = ch.wall_speed
    v_new[1:-1] = solve_banded((1, 1), _tridiagonal(ch, p, h_t), rhs)

    kappa = np.diff(v_new) / ch.dy
    L = np.zeros((kappa.size, 2, 2))
    L[:, 0, 1] = kappa
    c_new = lyapunov_step_batch(ch.c, L, np.zeros(kappa.size), p, h_t)

    return replace(ch, v=v_new, c=c_new, t=ch.t + h_t)


def run_to_steady(ch: Channel1D, p: JsParams, h_t: float, tol: float = 1e-8,
                  t_max: float = 50.0, log_every: int = 20000) -> Tuple[Channel1D, bool]:
    """
    Avance jusqu'à ce que la variation nodale maximale par unité de temps passe sous ``tol``.

    Returns:
        Tuple[Channel1D, bool]: (état final, convergence atteinte).
    """
    if tol <= 0.0:
        raise InvalidParameterError(config.ERROR_MESSAGES["invalid_parameter"].format(detail="tol doit être > 0"))

    step = 0
    rate = float("inf")
    while ch.t < t_max:
        new = step_channel(ch, p, h_t)
        rate = max(np.abs(new.v - ch.v).max(), np.abs(new.c - ch.c).max()) / h_t
        ch = new
        step += 1
        if step % log_every == 0:
            logger.info(f"📊 Canal t={ch.t:.3f} : variation {rate:.3e}")
        if rate < tol:
            logger.info(f"✅ Canal stationnaire à t={ch.t:.3f} ({step} pas)")
            return ch, True

    logger.warning(f"⚠️ Canal non stationnaire à t_max={t_max} (variation {rate:.3e})")
    return ch, False


def detect_bands(ch: Channel1D, p: JsParams, threshold: float = 0.05,
                 min_cells: int = 3, steady_tol: float = 1e-6) -> BandReport:
    """
    Segmente le profil de κ en bandes.

    Une interface est posée là où |Δκ| entre mailles voisines dépasse
    ``threshold``·max|κ| ; les segments de moins de ``min_cells`` mailles sont
    ignorés.

    Raises:
        NotSteadyError: si la contrainte totale n'est pas uniforme.
    """
    kappa = ch.shear_rates()
    sigma = ch.total_stress(p)
    spread = float(sigma.max() - sigma.min())
    sigma_mean = float(sigma.mean())
    if spread > steady_tol * max(1.0, abs(sigma_mean)):
        raise NotSteadyError(config.ERROR_MESSAGES["not_steady"].format(spread=spread))

    scale = max(float(np.abs(kappa).max()), 1e-12)
    cuts = np.nonzero(np.abs(np.diff(kappa)) > threshold * scale)[0] + 1
    segments = np.split(np.arange(kappa.size), cuts)

    roots = stress_to_shear_rates(p, sigma_mean) if sigma_mean > 0.0 else []
    classification = classify_curve(p)

    bands: List[Band] = []
    ignored = 0
    lever = 0.0
    for seg in segments:
        seg_kappa = float(kappa[seg].mean())
        width = seg.size * ch.dy
        lever += seg_kappa * width
        if seg.size < min_cells:
            ignored += seg.size
            continue
        bands.append(
            Band(
                kappa=seg_kappa,
                width=width,
                y_start=float(seg[0] * ch.dy),
                y_end=float((seg[-1] + 1) * ch.dy),
                n_cells=int(seg.size),
                branch=_branch_of(seg_kappa, classification),
            )
        )

    return BandReport(
        bands=bands,
        sigma_total=sigma_mean,
        stress_spread=spread,
        lever_mean_kappa=lever,
        ignored_cells=ignored,
        roots=roots,
    )


def _branch_of(kappa: float, classification) -> str:
    if not classification.is_non_monotone:
        return "unique"
    if kappa <= classification.kappa_max:
        return "low"
    if kappa >= classification.kappa_min:
        return "high"
    return "middle"


def profile_frame(ch: Channel1D, p: JsParams) -> pd.DataFrame:
    """Profil aux centres des mailles : y, v, kappa, c_xx, c_xy, c_yy, sigma_total."""
    return pd.DataFrame(
        {
            "y": ch.y_cells,
            "v": 0.5 * (ch.v[1:] + ch.v[:-1]),
            "kappa": ch.shear_rates(),
            "c_xx": ch.c[:, RR],
            "c_xy": ch.c[:, RZ],
            "c_yy": ch.c[:, ZZ],
            "sigma_total": ch.total_stress(p),
        }
    )


if __name__ == "__main__":
    # Test du module
    print("Test du module shear1d...")
    params = JsParams(Wi=0.5, mu_s=0.59, xi=0.2)
    channel = Channel1D.at_rest(41, 1.0, params)
    channel, converged = run_to_steady(channel, params, 1e-3, tol=1e-6, t_max=20.0)
    report = detect_bands(channel, params)
    print(f"✅ Convergé={converged}, {len(report.bands)} bande(s), σ={report.sigma_total:.6f}")
