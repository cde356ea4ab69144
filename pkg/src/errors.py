"""
Exceptions du projet.

Les messages lisibles sont centralisés dans ``config.ERROR_MESSAGES`` ; les
modules lèvent ces classes avec le message formaté.
"""

from typing import Optional, Sequence


class SimulationError(Exception):
    """Erreur de base de la boîte à outils."""


class InvalidParameterError(SimulationError, ValueError):
    """Paramètre physique hors de son domaine de validité."""


class ConfigurationError(SimulationError, ValueError):
    """Configuration de calcul incohérente ou illisible."""


class ProbeOutsideDomainError(ConfigurationError):
    """Sonde placée hors du domaine de calcul."""


class StepTooLargeError(SimulationError):
    """Système de Lyapunov singulier : le pas de temps doit être réduit."""


class PositivityLossError(SimulationError):
    """Le tenseur de conformation a perdu sa définie positivité."""

    def __init__(self, message: str, nodes: Optional[Sequence[int]] = None,
                 min_eigenvalue: float = float("nan")):
        super().__init__(message)
        self.nodes = list(nodes) if nodes is not None else []
        self.min_eigenvalue = min_eigenvalue


class MeshError(SimulationError):
    """Maillage impossible à construire ou invalide."""


class SolverError(SimulationError):
    """Échec du solveur linéaire."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class NotSteadyError(SimulationError):
    """L'état fourni n'est pas stationnaire."""


class CheckpointError(SimulationError):
    """Fichier de reprise corrompu ou incompatible."""
