"""
Configuration du projet.

Ce module centralise les paramètres de l'environnement (répertoires de sortie,
niveau de log, nombre de processus pour les balayages, ordre de factorisation)
ainsi que la description d'un calcul de chute de sphère (``RunConfig``), lue
depuis un fichier plat ``clé = valeur``.
"""

import os
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigurationError

# Charger les variables d'environnement
load_dotenv()


class Config:
    """Configuration centralisée du projet."""

    # ==================== Chemins de fichiers ====================
    # Répertoire racine du projet
    PROJECT_ROOT = Path(__file__).parent.parent

    # Répertoire des préréglages de calcul
    CONFIGS_DIR = PROJECT_ROOT / "data" / "configs"

    # Répertoire des sorties de calcul
    OUTPUT_DIR = Path(os.getenv("SIM_OUTPUT_DIR", str(PROJECT_ROOT / "data" / "runs")))

    # ==================== Exécution ====================
    LOG_LEVEL: str = os.getenv("SIM_LOG_LEVEL", "INFO")

    # Nombre de processus pour les balayages de paramètres
    SWEEP_WORKERS: int = int(os.getenv("SIM_SWEEP_WORKERS", "1"))

    # Ordre des colonnes pour SuperLU
    PERMC_SPEC: str = os.getenv("SIM_PERMC_SPEC", "COLAMD")

    # Taille des cellules de l'index spatial (multiple de la petite arête)
    LOCATE_CELL_FACTOR: float = float(os.getenv("SIM_LOCATE_CELL_FACTOR", "2.0"))

    # ==================== Tolérances numériques ====================
    # Résidu relatif maximal du système de Stokes
    SOLVER_RTOL: float = 1e-8

    # Tolérance barycentrique de localisation
    LOCATE_TOL: float = 1e-12

    # ==================== Streamlit ====================
    APP_TITLE: str = "🌀 Sphère en chute dans un fluide Johnson-Segalman"

    APP_DESCRIPTION: str = """
    Courbe d'écoulement non monotone, bandes de cisaillement en canal plan et
    oscillations auto-entretenues d'une sphère tombant dans un cylindre.
    """

    # ==================== Messages d'erreur ====================
    ERROR_MESSAGES = {
        "invalid_parameter": "❌ Paramètre invalide : {detail}",
        "invalid_config": "❌ Configuration invalide : {detail}",
        "probe_outside": "❌ La sonde '{name}' en {point} est hors du domaine",
        "step_too_large": "❌ Système de Lyapunov singulier sur {count} nœud(s) : réduire h_t",
        "positivity_loss": "❌ Perte de positivité du tenseur de conformation (valeur propre min {value:.3e})",
        "mesh_error": "❌ Erreur de maillage : {detail}",
        "solver_error": "❌ Échec du solveur (résidu relatif {residual:.3e})",
        "singular_operator": "❌ Opérateur de Stokes singulier : {detail}",
        "not_steady": "❌ État non stationnaire (écart de contrainte {spread:.3e})",
        "checkpoint_error": "❌ Fichier de reprise invalide : {detail}",
        "unknown_tag": "❌ Étiquette de bord inconnue : {tag}",
        "too_few_samples": "❌ Série trop courte pour l'analyse ({count} échantillons, minimum {minimum})",
    }

    # ==================== Messages de succès ====================
    SUCCESS_MESSAGES = {
        "mesh_ready": "✅ Maillage prêt",
        "operator_ready": "✅ Opérateur de Stokes assemblé et factorisé",
        "run_finished": "✅ Calcul terminé",
        "checkpoint_written": "✅ Point de reprise écrit",
    }

    @classmethod
    def validate_config(cls) -> bool:
        """
        Valide la configuration du projet.

        Returns:
            bool: True si la configuration est valide, False sinon.
        """
        if cls.SWEEP_WORKERS < 1:
            print(cls.ERROR_MESSAGES["invalid_config"].format(detail="SIM_SWEEP_WORKERS doit être ≥ 1"))
            return False

        if cls.LOCATE_CELL_FACTOR <= 0:
            print(cls.ERROR_MESSAGES["invalid_config"].format(detail="SIM_LOCATE_CELL_FACTOR doit être > 0"))
            return False

        # Créer les répertoires nécessaires
        cls.OUTPUT_DIR.mkdir(parents=True, exist_ok=True)
        cls.CONFIGS_DIR.mkdir(parents=True, exist_ok=True)

        return True

    @classmethod
    def get_preset_files(cls) -> list[Path]:
        """
        Récupère la liste des préréglages ``*.conf``.

        Returns:
            list[Path]: Chemins des fichiers de configuration disponibles.
        """
        if not cls.CONFIGS_DIR.exists():
            return []
        return sorted(cls.CONFIGS_DIR.glob("*.conf"))

    @classmethod
    def print_config(cls) -> None:
        """Affiche la configuration actuelle."""
        print("🔧 Configuration de l'environnement :")
        print(f"  📁 Sorties : {cls.OUTPUT_DIR}")
        print(f"  🗂️ Préréglages : {cls.CONFIGS_DIR}")
        print(f"  📝 Niveau de log : {cls.LOG_LEVEL}")
        print(f"  🧵 Processus de balayage : {cls.SWEEP_WORKERS}")
        print(f"  🧮 Ordre SuperLU : {cls.PERMC_SPEC}")
        print(f"  🔍 Facteur de cellule : {cls.LOCATE_CELL_FACTOR}")


# Instance globale de configuration
config = Config()


# ==================== Description d'un calcul ====================

DIMENSIONLESS_KEYS = ("Re", "Wi", "mu_s", "rho_ratio", "alpha")
DIMENSIONAL_KEYS = ("r_s", "r_c", "rho_s", "rho_f", "eta_s", "eta_p", "lam", "g")
SHARED_KEYS = ("xi", "q")


class DimensionlessBlock(BaseModel):
    """Groupes sans dimension d'un calcul (valeurs par défaut : calcul oscillant de référence)."""

    model_config = ConfigDict(frozen=True)

    Re: float = Field(default=0.0325, gt=0.0)
    Wi: float = Field(default=0.45, gt=0.0)
    mu_s: float = Field(default=0.03, gt=0.0, lt=1.0)
    xi: float = Field(default=0.7, ge=0.0, lt=1.0)
    q: float = Field(default=1.0, gt=0.0)
    rho_ratio: float = Field(default=6.3, gt=1.0)
    alpha: float = Field(default=4.115, gt=1.0)


class DimensionalBlock(BaseModel):
    """Grandeurs dimensionnelles (unités SI cohérentes)."""

    model_config = ConfigDict(frozen=True)

    r_s: float = Field(gt=0.0)
    r_c: float = Field(gt=0.0)
    rho_s: float = Field(gt=0.0)
    rho_f: float = Field(gt=0.0)
    eta_s: float = Field(gt=0.0)
    eta_p: float = Field(gt=0.0)
    lam: float = Field(gt=0.0)
    g: float = Field(gt=0.0)
    xi: float = Field(default=0.7, ge=0.0, lt=1.0)
    q: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def _check_geometry(self) -> "DimensionalBlock":
        if self.r_c <= self.r_s:
            raise ValueError("r_c doit être supérieur à r_s")
        return self


class RunConfig(BaseModel):
    """
    Description complète d'un calcul de chute de sphère.

    Un seul des deux blocs de paramètres (sans dimension ou dimensionnel) est
    présent. Les cadences sont exprimées en nombre de pas de temps.
    """

    model_config = ConfigDict(frozen=True)

    dimensionless: Optional[DimensionlessBlock] = None
    dimensional: Optional[DimensionalBlock] = None
    K: Optional[float] = Field(default=None, ge=1.0)

    # Maillage
    height: float = Field(default=16.0, gt=2.0)
    h_near: float = Field(default=0.1, gt=0.0)
    h_far: float = Field(default=1.0, gt=0.0)
    refine: int = Field(default=0, ge=0)

    # Temps
    h_t: float = Field(default=1e-3, gt=0.0)
    t_end: float = Field(default=30.0, gt=0.0)

    # Sorties
    probes: Dict[str, Tuple[float, float]] = Field(default_factory=dict)
    timeseries_every: int = Field(default=1, ge=1)
    probe_every: int = Field(default=10, ge=1)
    snapshot_every: int = Field(default=0, ge=0)
    checkpoint_every: int = Field(default=5000, ge=0)
    axis_every: int = Field(default=500, ge=0)
    log_every: int = Field(default=100, ge=1)
    seed: int = 0
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def _exactly_one_block(self) -> "RunConfig":
        if (self.dimensionless is None) == (self.dimensional is None):
            raise ValueError("exactement un bloc de paramètres (sans dimension ou dimensionnel) est requis")
        if self.h_near > self.h_far:
            raise ValueError("h_near doit être ≤ h_far")
        return self

    @field_validator("probes")
    @classmethod
    def _check_probes(cls, value: Dict[str, Tuple[float, float]]) -> Dict[str, Tuple[float, float]]:
        for name in value:
            if not name.isidentifier():
                raise ValueError(f"nom de sonde invalide : {name!r}")
        return value

    # --------------------------- Construction ---------------------------

    @classmethod
    def default(cls, **updates) -> "RunConfig":
        """Calcul oscillant de référence avec les sondes x1 et x2."""
        height = updates.get("height", 16.0)
        base = {
            "dimensionless": DimensionlessBlock(),
            "probes": {"x1": (1.2293, 0.0), "x2": (0.5, height / 2 - 0.5)},
        }
        base.update(updates)
        return cls.build(**base)

    @classmethod
    def build(cls, **fields) -> "RunConfig":
        """Construit une configuration en convertissant les erreurs pydantic."""
        try:
            return cls(**fields)
        except ValidationError as e:
            raise ConfigurationError(config.ERROR_MESSAGES["invalid_config"].format(detail=e)) from e

    @classmethod
    def from_flat(cls, values: Dict[str, str]) -> "RunConfig":
        """
        Construit une configuration depuis un dictionnaire plat ``clé -> texte``.

        Args:
            values (Dict[str, str]): Paires lues dans un fichier ou sur la ligne de commande.

        Returns:
            RunConfig: Configuration validée.

        Raises:
            ConfigurationError: Clé inconnue, valeur illisible ou blocs mélangés.
        """
        scalar_fields = {
            name for name in cls.model_fields if name not in ("dimensionless", "dimensional", "probes")
        }
        dimensionless: Dict[str, str] = {}
        dimensional: Dict[str, str] = {}
        shared: Dict[str, str] = {}
        probes: Dict[str, Tuple[float, float]] = {}
        top: Dict[str, str] = {}

        for key, raw in values.items():
            key = key.strip()
            raw = raw.strip()
            if key in DIMENSIONLESS_KEYS:
                dimensionless[key] = raw
            elif key in DIMENSIONAL_KEYS:
                dimensional[key] = raw
            elif key in SHARED_KEYS:
                shared[key] = raw
            elif key.startswith("probe."):
                probes[key[len("probe."):]] = _parse_point(key, raw)
            elif key in scalar_fields:
                top[key] = raw
            else:
                raise ConfigurationError(
                    config.ERROR_MESSAGES["invalid_config"].format(detail=f"clé inconnue '{key}'")
                )

        if dimensionless and dimensional:
            raise ConfigurationError(
                config.ERROR_MESSAGES["invalid_config"].format(
                    detail="paramètres sans dimension et dimensionnels mélangés"
                )
            )

        fields: Dict[str, object] = {k: (None if v.lower() == "none" else v) for k, v in top.items()}
        try:
            if dimensional:
                fields["dimensional"] = DimensionalBlock(**dimensional, **shared)
            else:
                fields["dimensionless"] = DimensionlessBlock(**dimensionless, **shared)
        except ValidationError as e:
            raise ConfigurationError(config.ERROR_MESSAGES["invalid_config"].format(detail=e)) from e

        if probes:
            fields["probes"] = probes
        return cls.build(**fields)

    @classmethod
    def from_file(cls, path: Optional[Path] = None, overrides: Iterable[str] = ()) -> "RunConfig":
        """
        Lit un fichier ``clé = valeur`` puis applique les surcharges ``clé=valeur``.

        Sans fichier, part des valeurs par défaut du calcul oscillant de référence.
        """
        values: Dict[str, str] = {}
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise ConfigurationError(
                    config.ERROR_MESSAGES["invalid_config"].format(detail=f"fichier introuvable {path}")
                )
            values.update(parse_flat_text(path.read_text(encoding="utf-8")))
        else:
            values.update(cls.default().to_flat())

        for item in overrides:
            if "=" not in item:
                raise ConfigurationError(
                    config.ERROR_MESSAGES["invalid_config"].format(detail=f"surcharge sans '=' : {item}")
                )
            key, raw = item.split("=", 1)
            key = key.strip()
            # Une surcharge d'un bloc remplace les clés de l'autre bloc
            if key in DIMENSIONAL_KEYS:
                for other in DIMENSIONLESS_KEYS:
                    values.pop(other, None)
            values[key] = raw.strip()
        return cls.from_flat(values)

    # --------------------------- Export ---------------------------

    def to_flat(self) -> Dict[str, str]:
        """Rend la configuration sous forme de paires ``clé -> texte``."""
        flat: Dict[str, str] = {}
        block = self.dimensionless if self.dimensionless is not None else self.dimensional
        for key, value in block.model_dump().items():
            flat[key] = repr(value)
        for key in self.model_fields:
            if key in ("dimensionless", "dimensional", "probes"):
                continue
            value = getattr(self, key)
            flat[key] = "none" if value is None else repr(value) if isinstance(value, float) else str(value)
        for name, (r, z) in self.probes.items():
            flat[f"probe.{name}"] = f"{r!r}, {z!r}"
        return flat

    def to_text(self) -> str:
        """Texte du fichier de configuration équivalent."""
        lines = ["# Configuration de calcul (clé = valeur)"]
        lines += [f"{key} = {value}" for key, value in self.to_flat().items()]
        return "\n".join(lines) + "\n"

    def with_axis_value(self, axis: str, value: float) -> "RunConfig":
        """
        Copie de la configuration avec un paramètre de balayage modifié.

        Args:
            axis (str): ``xi``, ``alpha`` ou ``rho_ratio``.
            value (float): Nouvelle valeur.
        """
        if axis not in ("xi", "alpha", "rho_ratio"):
            raise ConfigurationError(
                config.ERROR_MESSAGES["invalid_config"].format(detail=f"axe de balayage inconnu '{axis}'")
            )
        try:
            if self.dimensionless is not None:
                block = self.dimensionless.model_copy(update={axis: value})
                block = DimensionlessBlock(**block.model_dump())
                return self.build(**{**self._fields_dict(), "dimensionless": block})
            dim = self.dimensional
            update = {
                "xi": {"xi": value},
                "alpha": {"r_c": value * dim.r_s},
                "rho_ratio": {"rho_s": value * dim.rho_f},
            }[axis]
            block = DimensionalBlock(**{**dim.model_dump(), **update})
            return self.build(**{**self._fields_dict(), "dimensional": block})
        except ValidationError as e:
            raise ConfigurationError(config.ERROR_MESSAGES["invalid_config"].format(detail=e)) from e

    def _fields_dict(self) -> Dict[str, object]:
        return {name: getattr(self, name) for name in self.model_fields}


def parse_flat_text(text: str) -> Dict[str, str]:
    """
    Analyse un texte ``clé = valeur`` (commentaires ``#``, lignes vides ignorées).

    Raises:
        ConfigurationError: Ligne sans signe ``=``.
    """
    values: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(
                config.ERROR_MESSAGES["invalid_config"].format(detail=f"ligne {number} sans '=' : {line}")
            )
        key, raw = line.split("=", 1)
        values[key.strip()] = raw.strip()
    return values


def _parse_point(key: str, raw: str) -> Tuple[float, float]:
    try:
        r, z = (float(part) for part in raw.replace("(", "").replace(")", "").split(","))
    except ValueError as e:
        raise ConfigurationError(
            config.ERROR_MESSAGES["invalid_config"].format(detail=f"point illisible pour '{key}' : {raw}")
        ) from e
    return (r, z)


if __name__ == "__main__":
    # Test de la configuration
    print("Test de la configuration...")
    config.print_config()

    if config.validate_config():
        print("✅ Configuration valide")
        presets = config.get_preset_files()
        print(f"📚 {len(presets)} préréglage(s) trouvé(s)")
        for preset in presets:
            print(f"  - {preset.name}")
        print(RunConfig.default().to_text())
    else:
        print("❌ Configuration invalide")
