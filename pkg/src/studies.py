"""
Études de paramètres : courbe d'écoulement, canal 1-D et balayages de chutes de sphère.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from .config import RunConfig, config
from .errors import ConfigurationError
from .fem import assemble_momentum_operator
from .oscillations import OscillationReport
from .params import JsParams
from .rheology import classify_curve, sample_curve
from .shear1d import BandReport, Channel1D, detect_bands, profile_frame, run_to_steady
from .simulation import build_run_mesh, resolve_parameters, run_falling_sphere

logger = logging.getLogger(__name__)

DEFAULT_XI_GRID = tuple(round(0.1 * k, 1) for k in range(1, 9))
SWEEP_AXES = ("xi", "alpha", "rho_ratio")


def extrema_table(p: JsParams, xi_values: Iterable[float]) -> pd.DataFrame:
    """(κ_max, τ_max, κ_min, τ_min) par valeur de ξ ; seules les courbes non monotones ont une ligne."""
    rows = []
    for xi in xi_values:
        c = classify_curve(p.with_updates(xi=xi))
        if c.is_non_monotone:
            rows.append(
                {"xi": xi, "kappa_max": c.kappa_max, "tau_max": c.tau_max,
                 "kappa_min": c.kappa_min, "tau_min": c.tau_min}
            )
    return pd.DataFrame(rows, columns=["xi", "kappa_max", "tau_max", "kappa_min", "tau_min"])


def run_rheology(p: JsParams, output_dir: Path, xi_values: Sequence[float] = DEFAULT_XI_GRID,
                 n_samples: int = 2000) -> pd.DataFrame:
    """
    Écrit ``curve.csv`` (kappa, tau, dtau_dkappa) et ``extrema.csv`` (table en fonction de ξ).

    Returns:
        pd.DataFrame: Courbe échantillonnée.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    kappa, tau, slope = sample_curve(p, n_samples)
    curve = pd.DataFrame({"kappa": kappa, "tau": tau, "dtau_dkappa": slope})
    curve.to_csv(out / "curve.csv", index=False)
    table = extrema_table(p, xi_values)
    table.to_csv(out / "extrema.csv", index=False)
    classification = classify_curve(p)
    logger.info(f"📈 Courbe {classification.kind.value} écrite dans {out} ({len(table)} ligne(s) d'extrema)")
    return curve


@dataclass
class ChannelRun:
    channel: Channel1D
    converged: bool
    bands: Optional[BandReport]


def run_shear1d(p: JsParams, output_dir: Path, wall_speed: float, n_nodes: int = 81,
                h_t: float = 2e-4, t_max: float = 60.0, tol: float = 1e-7) -> ChannelRun:
    """
    Canal de Couette jusqu'à l'état stationnaire ; écrit ``profile.csv`` et ``bands.csv``.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    channel = Channel1D.at_rest(n_nodes, wall_speed, p)
    channel, converged = run_to_steady(channel, p, h_t, tol=tol, t_max=t_max)
    profile_frame(channel, p).to_csv(out / "profile.csv", index=False)

    bands = None
    if converged:
        bands = detect_bands(channel, p)
        bands.to_frame().to_csv(out / "bands.csv", index=False)
        logger.info(f"✅ {len(bands.bands)} bande(s), σ = {bands.sigma_total:.6f}")
    else:
        logger.warning("⚠️ Pas de détection de bandes sur un état non stationnaire")
    return ChannelRun(channel=channel, converged=converged, bands=bands)


# --------------------------- Balayages ---------------------------

def _member_config(cfg: RunConfig, axis: str, value: float, base: Path) -> RunConfig:
    member = cfg.with_axis_value(axis, value)
    return RunConfig.build(**{**member._fields_dict(), "output_dir": str(base / f"{axis}_{value:g}")})


def _summary_row(axis: str, value: float, result) -> dict:
    """
    Ligne de ``summary.csv`` ; un membre sans rapport d'oscillations (série trop
    courte) garde les mêmes colonnes, à NaN, avec ``sustained`` à False.
    """
    row = {axis: value, "value": value}
    if result.report is not None:
        row.update(result.report.summary())
    else:
        row.update({key: float("nan") for key in OscillationReport().summary()})
        row["sustained"] = False
    return row


def _run_member(member: RunConfig, axis: str, value: float) -> dict:
    return _summary_row(axis, value, run_falling_sphere(member))


def run_sweep(cfg: RunConfig, axis: str, values: Sequence[float], output_dir: Optional[Path] = None,
              workers: Optional[int] = None) -> pd.DataFrame:
    """
    Un calcul par valeur du paramètre balayé et ``summary.csv`` (value, amplitude, period, sustained…).

    En séquentiel, le maillage est partagé lorsque la géométrie ne varie pas et
    l'opérateur de Stokes lorsque (Re, μ_s) ne varient pas non plus.

    Raises:
        ConfigurationError: axe inconnu ou valeurs vides.
    """
    if axis not in SWEEP_AXES:
        raise ConfigurationError(config.ERROR_MESSAGES["invalid_config"].format(detail=f"axe '{axis}' inconnu"))
    if not values:
        raise ConfigurationError(config.ERROR_MESSAGES["invalid_config"].format(detail="aucune valeur à balayer"))

    base = Path(output_dir) if output_dir else Path(cfg.output_dir or config.OUTPUT_DIR / "sweep")
    base.mkdir(parents=True, exist_ok=True)
    members = [_member_config(cfg, axis, float(v), base) for v in values]
    workers = workers or config.SWEEP_WORKERS
    logger.info(f"🚀 Balayage de {axis} sur {list(values)} ({workers} processus)")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_member, members, [axis] * len(members), [float(v) for v in values]))
    else:
        rows: List[dict] = []
        mesh = None
        operator = None
        for member, value in zip(members, values):
            derived = resolve_parameters(member)
            if axis == "alpha" or mesh is None:
                mesh = build_run_mesh(member, derived.alpha)
                operator = None
            if operator is None or operator.params.Re != derived.params.Re or operator.params.mu_s != derived.params.mu_s:
                operator = assemble_momentum_operator(mesh, derived.params, member.h_t)
            rows.append(_summary_row(axis, float(value), run_falling_sphere(member, mesh=mesh, operator=operator)))

    summary = pd.DataFrame(rows)
    summary.to_csv(base / "summary.csv", index=False)
    logger.info(f"✅ Résumé du balayage écrit dans {base / 'summary.csv'}")
    return summary


def amplitudes_increasing(summary: pd.DataFrame) -> bool:
    """
    Amplitudes strictement croissantes dans l'ordre des valeurs balayées.

    Un membre sans amplitude (NaN) rend le résultat faux.
    """
    amp = summary.sort_values("value")["amplitude"].to_numpy(dtype=float)
    if np.isnan(amp).any():
        return False
    return bool(np.all(np.diff(amp) > 0.0))
