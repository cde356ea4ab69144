"""
Entrées / sorties des calculs.

- séries CSV écrites par blocs avec pandas ;
- instantanés VTK legacy ASCII (grille non structurée de triangles) ;
- fichiers de reprise binaires : signature, version, en-tête JSON, tableaux
  float64 petit-boutistes et empreinte sha256 finale.
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .config import config
from .errors import CheckpointError
from .fem import FieldState
from .mesh import TriMesh
from .sphere import SphereState

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"JSFALLCK"
CHECKPOINT_VERSION = 1
_DIGEST_SIZE = 32


class CsvAppender:
    """
    Écriture incrémentale d'un CSV à colonnes fixes.

    Les lignes sont accumulées puis ajoutées au fichier tous les ``flush_every``
    enregistrements et à la fermeture.
    """

    def __init__(self, path: Path, columns: Sequence[str], flush_every: int = 500, append: bool = False):
        self.path = Path(path)
        self.columns = list(columns)
        self.flush_every = flush_every
        self._rows: List[Sequence[float]] = []
        if not append or not self.path.exists():
            pd.DataFrame(columns=self.columns).to_csv(self.path, index=False)

    def append(self, *row: float) -> None:
        self._rows.append(row)
        if len(self._rows) >= self.flush_every:
            self.flush()

    def flush(self) -> None:
        if not self._rows:
            return
        pd.DataFrame(self._rows, columns=self.columns).to_csv(self.path, mode="a", header=False, index=False)
        self._rows.clear()

    def close(self) -> None:
        self.flush()

    def __enter__(self) -> "CsvAppender":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def truncate_csv(path: Path, t_max: float) -> None:
    """Supprime les lignes de temps > t_max (reprise après un point de sauvegarde)."""
    path = Path(path)
    if not path.exists():
        return
    df = pd.read_csv(path)
    if "t" in df.columns:
        df[df["t"] <= t_max + 1e-12].to_csv(path, index=False)


# --------------------------- VTK ---------------------------

def write_vtk(path: Path, mesh: TriMesh, point_data: Optional[Dict[str, np.ndarray]] = None,
              title: str = "falling sphere") -> None:
    """
    Grille non structurée legacy ASCII sur les sommets du maillage.

    Args:
        point_data: Champs nodaux, scalaires (nV,) ou vecteurs (nV, 2|3).
    """
    path = Path(path)
    n_v, n_t = mesh.n_vertices, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {n_v} double")
    lines += [f"{r!r} {z!r} 0.0" for r, z in mesh.vertices.tolist()]
    lines.append(f"CELLS {n_t} {4 * n_t}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"CELL_TYPES {n_t}")
    lines += ["5"] * n_t

    if point_data:
        lines.append(f"POINT_DATA {n_v}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.ndim == 1:
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                lines += [repr(v) for v in values.tolist()]
            else:
                vec = np.zeros((n_v, 3))
                vec[:, : values.shape[1]] = values[:, :3]
                lines.append(f"VECTORS {name} double")
                lines += [f"{a!r} {b!r} {c!r}" for a, b, c in vec.tolist()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# --------------------------- Points de reprise ---------------------------

@dataclass
class Checkpoint:
    step: int
    state: FieldState
    sphere: SphereState
    mesh_sha256: str


def write_checkpoint(path: Path, step: int, state: FieldState, sphere: SphereState, mesh: TriMesh) -> Path:
    """
    Écrit un point de reprise de façon atomique (fichier temporaire puis renommage).

    Disposition : signature (8 octets) | version uint32 | taille d'en-tête uint32 |
    en-tête JSON UTF-8 | u, p, c en float64 | sha256 de tout ce qui précède.
    """
    path = Path(path)
    header = {
        "step": int(step),
        "t": float(state.t),
        "n_u": int(state.u.shape[0]),
        "n_v": int(state.p.shape[0]),
        "mesh_sha256": mesh.fingerprint(),
        "U": float(sphere.U),
        "dU": float(sphere.dU),
        "K": float(sphere.K),
        "rho_ratio": float(sphere.rho_ratio),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(
        [
            CHECKPOINT_MAGIC,
            np.array([CHECKPOINT_VERSION, len(header_bytes)], dtype="<u4").tobytes(),
            header_bytes,
            np.ascontiguousarray(state.u, dtype="<f8").tobytes(),
            np.ascontiguousarray(state.p, dtype="<f8").tobytes(),
            np.ascontiguousarray(state.c, dtype="<f8").tobytes(),
        ]
    )
    digest = hashlib.sha256(body).digest()

    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(body)
        f.write(digest)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)
    logger.info(f"{config.SUCCESS_MESSAGES['checkpoint_written']} : {path.name} (pas {step})")
    return path


def _fail(detail: str) -> CheckpointError:
    return CheckpointError(config.ERROR_MESSAGES["checkpoint_error"].format(detail=detail))


def read_checkpoint(path: Path, mesh: Optional[TriMesh] = None) -> Checkpoint:
    """
    Relit un point de reprise.

    Args:
        path (Path): Fichier de reprise.
        mesh (Optional[TriMesh]): Maillage attendu ; son empreinte doit correspondre.

    Raises:
        CheckpointError: fichier tronqué, corrompu, de version ou de maillage incompatible.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise _fail(f"lecture impossible ({e})") from e

    head = len(CHECKPOINT_MAGIC) + 8
    if len(data) < head + _DIGEST_SIZE or data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise _fail("signature absente")
    body, digest = data[:-_DIGEST_SIZE], data[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise _fail("empreinte sha256 invalide")

    version, header_len = np.frombuffer(data, dtype="<u4", count=2, offset=len(CHECKPOINT_MAGIC))
    if int(version) != CHECKPOINT_VERSION:
        raise _fail(f"version {int(version)} non prise en charge")
    try:
        header = json.loads(body[head: head + int(header_len)].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise _fail("en-tête illisible") from e

    n_u, n_v = header["n_u"], header["n_v"]
    payload = np.frombuffer(body, dtype="<f8", offset=head + int(header_len))
    if payload.size != 2 * n_u + n_v + 4 * n_v:
        raise _fail("taille des tableaux incohérente")
    if mesh is not None and header["mesh_sha256"] != mesh.fingerprint():
        raise _fail("maillage différent de celui du calcul")

    u = payload[: 2 * n_u].reshape(n_u, 2).copy()
    p = payload[2 * n_u: 2 * n_u + n_v].copy()
    c = payload[2 * n_u + n_v:].reshape(n_v, 4).copy()
    state = FieldState(u=u, p=p, c=c, t=header["t"])
    sphere = SphereState(U=header["U"], dU=header["dU"], K=header["K"], rho_ratio=header["rho_ratio"])
    return Checkpoint(step=header["step"], state=state, sphere=sphere, mesh_sha256=header["mesh_sha256"])


def latest_checkpoint(directory: Path) -> Optional[Path]:
    """Point de reprise le plus récent (``checkpoint_<pas>.bin``) d'un répertoire."""
    files = sorted(Path(directory).glob("checkpoint_*.bin"), key=lambda f: int(f.stem.split("_")[-1]))
    return files[-1] if files else None
