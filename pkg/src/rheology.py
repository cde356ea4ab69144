"""
Rhéologie en cisaillement simple stationnaire du modèle Johnson-Segalman.

Ce module évalue la courbe d'écoulement τ(κ), sa pente, classe la courbe
(monotone ou non) à partir d'une quadratique fermée et inverse la courbe pour
l'analyse des bandes de cisaillement.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from .params import JsParams

logger = logging.getLogger(__name__)


class CurveKind(str, Enum):
    MONOTONE = "Monotone"
    NON_MONOTONE = "NonMonotone"


@dataclass(frozen=True)
class CurveClassification:
    """Nature de la courbe et, si elle est non monotone, ses extrema locaux."""

    kind: CurveKind
    kappa_max: Optional[float] = None
    tau_max: Optional[float] = None
    kappa_min: Optional[float] = None
    tau_min: Optional[float] = None

    @property
    def is_non_monotone(self) -> bool:
        return self.kind is CurveKind.NON_MONOTONE


def shear_stress(p: JsParams, kappa):
    """
    Contrainte de cisaillement stationnaire τ(κ).

    τ(κ) = μ_s κ + ζ μ κ / (q ζ² + ξ(2−ξ) κ²). Accepte un scalaire ou un tableau.
    """
    zeta = p.zeta
    return p.mu_s * kappa + zeta * p.mu * kappa / (p.q * zeta**2 + p.beta * kappa**2)


def shear_stress_slope(p: JsParams, kappa):
    """Pente analytique dτ/dκ."""
    zeta = p.zeta
    s = p.beta * kappa**2
    denom = p.q * zeta**2 + s
    return p.mu_s + zeta * p.mu * (p.q * zeta**2 - s) / denom**2


def _extremum_roots(p: JsParams) -> Optional[tuple]:
    """
    Racines positives en s = ξ(2−ξ)κ² de la quadratique dτ/dκ = 0.

    Returns:
        Optional[tuple]: (s_petit, s_grand) ou None si la courbe est monotone.
    """
    if p.beta <= 0.0:
        return None
    zeta, mu, mu_s, q = p.zeta, p.mu, p.mu_s, p.q
    a = mu_s
    b = 2.0 * q * mu_s * zeta**2 - zeta * mu
    c = q**2 * mu_s * zeta**4 + q * zeta**3 * mu
    # Discriminant factorisé : ζ³ μ (1 − μ_s − 8 q μ_s)
    disc = zeta**3 * mu * (1.0 - mu_s - 8.0 * q * mu_s)
    if disc <= 0.0 or b >= 0.0:
        return None
    # Forme stable des racines
    w = -0.5 * (b - math.sqrt(disc))
    s_large = w / a
    s_small = c / w
    return (s_small, s_large)


def classify_curve(p: JsParams) -> CurveClassification:
    """
    Classe la courbe τ(κ).

    Non monotone si et seulement si ξ > 0 et μ_s < 1/(1 + 8q) ; κ_max provient
    de la plus petite racine.
    """
    roots = _extremum_roots(p)
    if roots is None:
        return CurveClassification(kind=CurveKind.MONOTONE)

    s_small, s_large = roots
    kappa_max = math.sqrt(s_small / p.beta)
    kappa_min = math.sqrt(s_large / p.beta)
    return CurveClassification(
        kind=CurveKind.NON_MONOTONE,
        kappa_max=kappa_max,
        tau_max=float(shear_stress(p, kappa_max)),
        kappa_min=kappa_min,
        tau_min=float(shear_stress(p, kappa_min)),
    )


def scan_domain(p: JsParams, classification: Optional[CurveClassification] = None) -> float:
    """Borne supérieure de balayage : 10 κ_min si non monotone, sinon 100 ζ."""
    classification = classification or classify_curve(p)
    if classification.is_non_monotone:
        return 10.0 * classification.kappa_min
    return 100.0 * p.zeta


def stress_to_shear_rates(p: JsParams, tau: float) -> List[float]:
    """
    Taux de cisaillement κ tels que τ(κ) = tau, par ordre croissant.

    Chaque branche monotone est encadrée puis résolue par la méthode de Brent
    (encadrement garanti, largeur finale 1e-12 relative au plus).

    Args:
        p (JsParams): Paramètres du modèle.
        tau (float): Contrainte cible, strictement positive.

    Returns:
        List[float]: 1 à 3 racines.
    """
    if tau <= 0.0:
        raise ValueError("tau doit être strictement positif")

    classification = classify_curve(p)
    tol = 1e-12 * max(1.0, tau)
    # τ(κ) ≥ μ_s κ : aucune racine au-delà de tau / μ_s
    upper = tau / p.mu_s * (1.0 + 1e-9) + 1.0

    if classification.is_non_monotone:
        breaks = [0.0, classification.kappa_max, classification.kappa_min, max(upper, classification.kappa_min * 2.0)]
    else:
        breaks = [0.0, upper]

    def f(k: float) -> float:
        return float(shear_stress(p, k)) - tau

    roots: List[float] = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        f_lo, f_hi = f(lo), f(hi)
        if abs(f_lo) <= tol and lo > 0.0:
            roots.append(lo)
        elif abs(f_hi) <= tol:
            roots.append(hi)
        elif f_lo * f_hi < 0.0:
            roots.append(brentq(f, lo, hi, xtol=1e-14, rtol=4.0 * np.finfo(float).eps, maxiter=500))

    unique: List[float] = []
    for root in sorted(roots):
        if not unique or abs(root - unique[-1]) > 1e-9 * max(1.0, root):
            unique.append(root)
    return unique


def sample_curve(p: JsParams, n: int = 2000, kappa_end: Optional[float] = None):
    """
    Échantillonne la courbe sur [0, kappa_end].

    Returns:
        tuple: (kappa, tau, slope) en tableaux numpy.
    """
    kappa_end = kappa_end or scan_domain(p)
    kappa = np.linspace(0.0, kappa_end, n)
    return kappa, shear_stress(p, kappa), shear_stress_slope(p, kappa)


if __name__ == "__main__":
    # Test du module
    print("Test du module rheology...")
    params = JsParams(Wi=0.45, mu_s=0.03, xi=0.5)
    c = classify_curve(params)
    print(f"📈 {c.kind.value} : κ_max={c.kappa_max:.4f}, τ_max={c.tau_max:.4f}, κ_min={c.kappa_min:.4f}")
    roots = stress_to_shear_rates(params, 0.5 * (c.tau_max + c.tau_min))
    print(f"🔍 Racines au plateau : {roots}")
