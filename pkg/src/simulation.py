"""
Orchestration d'un calcul de chute de sphère.

Chaque pas enchaîne : remontée des caractéristiques, interpolation de u et c
aux pieds, résolution de la quantité de mouvement avec (c, d_tU) anciens, mise à
jour de la conformation, calcul de la traînée puis avance de la sphère.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from .config import DimensionalBlock, RunConfig, config
from .errors import InvalidParameterError, ProbeOutsideDomainError, SimulationError
from .fem import (
    FieldState,
    MomentumOperator,
    advance_conformation_field,
    assemble_momentum_operator,
    backtrack_feet,
    interpolate_at_feet,
    interpolate_p1,
    interpolate_p2,
    nodal_velocity_gradient,
    solve_momentum_step,
)
from .io_utils import CsvAppender, latest_checkpoint, read_checkpoint, truncate_csv, write_checkpoint, write_vtk
from .mesh import BoundaryTag, PointLocations, TriMesh, build_sphere_in_cylinder, locate_points, refine_regular, write_mesh_text
from .oscillations import MIN_SAMPLES, OscillationReport, analyze_oscillations
from .params import JsParams
from .sphere import SphereState, advance_sphere, drag_force, wall_correction
from .tensor_core import RR, RZ, TT, ZZ, min_eigenvalue_batch, stress_from_conformation_array

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DerivedParameters:
    """Groupes sans dimension d'un calcul."""

    params: JsParams
    rho_ratio: float
    alpha: float
    K: float
    U_N: float = float("nan")


def derive_dimensionless(block: DimensionalBlock, K: Optional[float] = None) -> DerivedParameters:
    """
    Groupes sans dimension à partir des grandeurs dimensionnelles.

    U_N = 2 r_s² (ρ_s − ρ_f) g / (9 η K), η = η_s + η_p,
    Re = ρ_f U_N r_s / η, Wi = λ U_N / r_s, μ_s = η_s / η.

    Raises:
        InvalidParameterError: ρ_s ≤ ρ_f (la sphère ne tombe pas).
    """
    if block.rho_s <= block.rho_f:
        raise InvalidParameterError(
            config.ERROR_MESSAGES["invalid_parameter"].format(detail="rho_s doit être supérieur à rho_f")
        )
    alpha = block.r_c / block.r_s
    K = K if K is not None else wall_correction(alpha)
    eta = block.eta_s + block.eta_p
    U_N = 2.0 * block.r_s**2 * (block.rho_s - block.rho_f) * block.g / (9.0 * eta * K)
    params = JsParams(
        Re=block.rho_f * U_N * block.r_s / eta,
        Wi=block.lam * U_N / block.r_s,
        mu_s=block.eta_s / eta,
        xi=block.xi,
        q=block.q,
    )
    return DerivedParameters(params=params, rho_ratio=block.rho_s / block.rho_f, alpha=alpha, K=K, U_N=U_N)


def resolve_parameters(cfg: RunConfig) -> DerivedParameters:
    """Paramètres sans dimension d'une configuration, quel que soit son bloc."""
    if cfg.dimensional is not None:
        return derive_dimensionless(cfg.dimensional, cfg.K)
    block = cfg.dimensionless
    params = JsParams(Re=block.Re, Wi=block.Wi, mu_s=block.mu_s, xi=block.xi, q=block.q)
    K = cfg.K if cfg.K is not None else wall_correction(block.alpha)
    return DerivedParameters(params=params, rho_ratio=block.rho_ratio, alpha=block.alpha, K=K)


def build_run_mesh(cfg: RunConfig, alpha: float) -> TriMesh:
    mesh = build_sphere_in_cylinder(alpha, cfg.height, cfg.h_near, cfg.h_far)
    for _ in range(cfg.refine):
        mesh = refine_regular(mesh)
    return mesh


# --------------------------- Sondes ---------------------------

def locate_probes(mesh: TriMesh, probes: Dict[str, Tuple[float, float]]) -> Dict[str, PointLocations]:
    """
    Localise les sondes une fois pour toutes.

    Une sonde posée sur la sphère exacte est acceptée si elle est à moins d'une
    flèche de corde du bord polygonal.

    Raises:
        ProbeOutsideDomainError: sonde hors du domaine.
    """
    sphere_edges = mesh.tagged_edges(BoundaryTag.SPHERE)
    sagitta = float(mesh.edge_lengths[sphere_edges].max() ** 2 / 8.0) if sphere_edges.size else 0.0
    located = {}
    for name, point in probes.items():
        query = np.asarray(point, dtype=float)[None, :]
        loc = locate_points(mesh, query)
        distance = float(np.hypot(*(loc.points[0] - query[0])))
        if not loc.inside[0] and distance > sagitta + 1e-12:
            raise ProbeOutsideDomainError(
                config.ERROR_MESSAGES["probe_outside"].format(name=name, point=tuple(point))
            )
        located[name] = loc
    return located


def sample_probe(mesh: TriMesh, state: FieldState, loc: PointLocations) -> Tuple[float, float, float]:
    u = interpolate_p2(mesh, state.u, loc)[0]
    pressure = float(interpolate_p1(mesh, state.p, loc)[0])
    return float(u[0]), float(u[1]), pressure


def axis_nodes(mesh: TriMesh) -> np.ndarray:
    """Nœuds P2 de l'axe dans le fluide, triés par z croissant."""
    nodes = mesh.tagged_p2_nodes(BoundaryTag.AXIS)
    nodes = np.unique(nodes)
    return nodes[np.argsort(mesh.p2_nodes[nodes, 1], kind="stable")]


def snapshot_fields(opr: MomentumOperator, state: FieldState, params: JsParams) -> Dict[str, np.ndarray]:
    """Champs nodaux d'un instantané VTK (vitesse, pression, c, τ_p, gradients, valeur propre min)."""
    n_v = opr.mesh.n_vertices
    L, hoop = nodal_velocity_gradient(opr, state.u)
    tau = stress_from_conformation_array(state.c, params)
    fields = {
        "velocity": state.u[:n_v],
        "pressure": state.p,
        "min_eig_c": min_eigenvalue_batch(state.c),
        "dr_ur": L[:, 0, 0],
        "dz_ur": L[:, 0, 1],
        "dr_uz": L[:, 1, 0],
        "dz_uz": L[:, 1, 1],
        "ur_over_r": hoop,
    }
    for name, col in (("rr", RR), ("rz", RZ), ("zz", ZZ), ("tt", TT)):
        fields[f"c_{name}"] = state.c[:, col]
        fields[f"tau_{name}"] = tau[:, col]
    return fields


# --------------------------- Boucle en temps ---------------------------

@dataclass
class RunResult:
    output_dir: Path
    timeseries: pd.DataFrame
    report: Optional[OscillationReport]
    state: FieldState
    sphere: SphereState
    mesh: TriMesh
    steps: int


def run_falling_sphere(cfg: RunConfig, resume: bool = False, mesh: Optional[TriMesh] = None,
                       operator: Optional[MomentumOperator] = None) -> RunResult:
    """
    Calcul complet depuis le repos (ou depuis le dernier point de reprise).

    Args:
        cfg (RunConfig): Configuration validée.
        resume (bool): Reprendre au dernier ``checkpoint_<pas>.bin`` du répertoire de sortie.
        mesh (Optional[TriMesh]): Maillage déjà construit pour cette géométrie.
        operator (Optional[MomentumOperator]): Opérateur réutilisable s'il correspond (Re, μ_s, h_t).

    Returns:
        RunResult: Séries, rapport d'oscillations et état final.

    Raises:
        SimulationError: toute erreur de module, après écriture d'un point de reprise.
    """
    derived = resolve_parameters(cfg)
    params = derived.params
    h_t = cfg.h_t

    out = Path(cfg.output_dir) if cfg.output_dir else config.OUTPUT_DIR / "sphere"
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.conf").write_text(cfg.to_text(), encoding="utf-8")

    mesh = mesh if mesh is not None else build_run_mesh(cfg, derived.alpha)
    write_mesh_text(mesh, out / "mesh.txt")
    probes = locate_probes(mesh, cfg.probes)

    reusable = (
        operator is not None
        and operator.mesh is mesh
        and operator.h_t == h_t
        and operator.params.Re == params.Re
        and operator.params.mu_s == params.mu_s
    )
    opr = operator if reusable else assemble_momentum_operator(mesh, params, h_t)

    state = FieldState.at_rest(mesh, params)
    sphere = SphereState.at_rest(derived.K, derived.rho_ratio)
    start = 0
    checkpoint = latest_checkpoint(out) if resume else None
    if checkpoint is not None:
        restored = read_checkpoint(checkpoint, mesh)
        state, sphere, start = restored.state, restored.sphere, restored.step
        logger.info(f"🔄 Reprise au pas {start} (t={state.t:.4f}) depuis {checkpoint.name}")
        for name in ["timeseries.csv", "axis_profile.csv"] + [f"probes_{p}.csv" for p in probes]:
            truncate_csv(out / name, state.t)

    append = checkpoint is not None
    series = CsvAppender(out / "timeseries.csv", ["t", "U", "dU", "F_d", "min_eig_c"], append=append)
    probe_files = {
        name: CsvAppender(out / f"probes_{name}.csv", ["t", "u_r", "u_z", "p"], append=append) for name in probes
    }
    axis_file = CsvAppender(out / "axis_profile.csv", ["t", "z", "u_z", "u_z_lab"], append=append)
    on_axis = axis_nodes(mesh)

    n_steps = int(round(cfg.t_end / h_t))
    logger.info(
        f"🚀 Chute de sphère : Re={params.Re:.4g}, Wi={params.Wi:.4g}, μ_s={params.mu_s:.4g}, ξ={params.xi:.3g}, "
        f"℘={derived.rho_ratio:.4g}, α={derived.alpha:.4g}, K={derived.K:.4f}, {n_steps} pas"
    )

    step = start
    try:
        while step < n_steps:
            feet = backtrack_feet(mesh, state.u, h_t)
            u_foot, c_foot = interpolate_at_feet(mesh, state, feet)
            u_new, p_new = solve_momentum_step(opr, state, u_foot, sphere.dU, sphere.U)
            c_new = advance_conformation_field(opr, c_foot, u_new, params, h_t)
            new_state = FieldState(u=u_new, p=p_new, c=c_new, t=(step + 1) * h_t)
            F_d = drag_force(mesh, new_state, params)
            sphere = advance_sphere(sphere, F_d, params, h_t)
            state = new_state
            step += 1

            min_eig = state.min_eigenvalue()
            logger.debug(f"pas {step} : valeur propre min de c = {min_eig:.6e}")
            if step % cfg.timeseries_every == 0:
                series.append(state.t, sphere.U, sphere.dU, F_d, min_eig)
            if step % cfg.probe_every == 0:
                for name, loc in probes.items():
                    probe_files[name].append(state.t, *sample_probe(mesh, state, loc))
            if cfg.axis_every and step % cfg.axis_every == 0:
                for node in on_axis:
                    u_z = float(state.u[node, 1])
                    axis_file.append(state.t, float(mesh.p2_nodes[node, 1]), u_z, u_z - sphere.U)
            if cfg.snapshot_every and step % cfg.snapshot_every == 0:
                write_vtk(out / f"fields_{step}.vtk", mesh, snapshot_fields(opr, state, params), f"t={state.t}")
            if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                _flush_all(series, axis_file, probe_files)
                write_checkpoint(out / f"checkpoint_{step}.bin", step, state, sphere, mesh)
            if step % cfg.log_every == 0:
                logger.info(
                    f"📊 t={state.t:.3f} U={sphere.U:.6f} dU={sphere.dU:.4e} F_d={F_d:.6f} λ_min={min_eig:.3e}"
                )
    except SimulationError as e:
        logger.error(f"❌ Calcul interrompu au pas {step + 1} : {e}")
        _flush_all(series, axis_file, probe_files)
        write_checkpoint(out / f"checkpoint_{step}.bin", step, state, sphere, mesh)
        raise
    finally:
        _flush_all(series, axis_file, probe_files)

    timeseries = pd.read_csv(out / "timeseries.csv")
    report = None
    if len(timeseries) >= MIN_SAMPLES:
        report = analyze_oscillations(timeseries["t"], timeseries["U"])
        (out / "oscillations.json").write_text(json.dumps(report.summary(), indent=2), encoding="utf-8")
    logger.info(f"{config.SUCCESS_MESSAGES['run_finished']} : {step} pas, U final {sphere.U:.6f}")
    return RunResult(
        output_dir=out, timeseries=timeseries, report=report, state=state, sphere=sphere, mesh=mesh, steps=step
    )


def _flush_all(series: CsvAppender, axis_file: CsvAppender, probe_files: Dict[str, CsvAppender]) -> None:
    series.flush()
    axis_file.flush()
    for appender in probe_files.values():
        appender.flush()


def run_probe_series(cfg: RunConfig, points: Dict[str, Tuple[float, float]]) -> Dict[str, pd.DataFrame]:
    """
    Calcul avec les sondes données ; renvoie la série (t, u_r, u_z, p) de chacune.

    Raises:
        ProbeOutsideDomainError: avant tout pas de temps si une sonde est hors domaine.
    """
    probe_cfg = RunConfig.build(**{**cfg._fields_dict(), "probes": dict(points)})
    result = run_falling_sphere(probe_cfg)
    return {name: pd.read_csv(result.output_dir / f"probes_{name}.csv") for name in points}


def newtonian_terminal_speed(result: RunResult, window: float = 0.1) -> float:
    """Vitesse moyenne sur la dernière fraction ``window`` de la série."""
    ts = result.timeseries
    tail = ts[ts["t"] >= ts["t"].iloc[-1] * (1.0 - window)]
    return float(tail["U"].mean()) if not tail.empty else math.nan
