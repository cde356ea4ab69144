"""
Paramètres sans dimension du modèle Johnson-Segalman.

``JsParams`` regroupe Re, Wi, μ_s, ξ et le coefficient q du dénominateur de la
courbe de cisaillement ; les grandeurs dérivées (μ_p, a, ζ, μ, concentration
d'équilibre) sont exposées en propriétés.
"""

from pydantic import BaseModel, ConfigDict, Field


class JsParams(BaseModel):
    """
    Paramètres du modèle JS.

    Invariants : μ_s + μ_p = 1, a = 1 − ξ ∈ (0, 1], Wi > 0, q > 0.
    """

    model_config = ConfigDict(frozen=True)

    Re: float = Field(default=0.0, ge=0.0)
    Wi: float = Field(gt=0.0)
    mu_s: float = Field(gt=0.0, lt=1.0)
    xi: float = Field(default=0.0, ge=0.0, lt=1.0)
    q: float = Field(default=1.0, gt=0.0)

    @property
    def mu_p(self) -> float:
        """Rapport de viscosité polymère, 1 − μ_s."""
        return 1.0 - self.mu_s

    @property
    def a(self) -> float:
        """Paramètre de glissement a = 1 − ξ."""
        return 1.0 - self.xi

    @property
    def zeta(self) -> float:
        return 1.0 / self.Wi

    @property
    def mu(self) -> float:
        return (1.0 - self.mu_s) / self.Wi

    @property
    def beta(self) -> float:
        """Facteur ξ(2 − ξ) de la courbe de cisaillement."""
        return self.xi * (2.0 - self.xi)

    @property
    def c_eq(self) -> float:
        """Valeur diagonale de la conformation d'équilibre μ_p / (a Wi)."""
        return self.mu_p / (self.a * self.Wi)

    def with_updates(self, **updates) -> "JsParams":
        """Copie validée avec des champs modifiés."""
        return JsParams(**{**self.model_dump(), **updates})


# Jeux de paramètres de référence
BANDING_PARAMS = JsParams(Re=0.0, Wi=0.45, mu_s=0.03, xi=0.5)
STEADY_PARAMS = JsParams(Re=0.0325, Wi=0.5, mu_s=0.59, xi=0.2)
OSCILLATING_PARAMS = JsParams(Re=0.0325, Wi=0.45, mu_s=0.03, xi=0.7)
