"""
Interface en ligne de commande.

Sous-commandes : rheology, shear1d, sphere, sweep, mesh, print-config, analyze.
Code de sortie 0 en cas de succès, 1 sur toute ``SimulationError``.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from .config import RunConfig, config
from .errors import SimulationError
from .io_utils import write_vtk
from .mesh import mesh_report, write_mesh_text
from .oscillations import analyze_oscillations
from .params import JsParams
from .simulation import build_run_mesh, resolve_parameters, run_falling_sphere
from .studies import DEFAULT_XI_GRID, SWEEP_AXES, run_rheology, run_shear1d, run_sweep

logger = logging.getLogger(__name__)


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _add_js_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--Wi", type=float, default=0.45, help="Nombre de Weissenberg")
    parser.add_argument("--mu-s", type=float, default=0.03, help="Rapport de viscosité du solvant")
    parser.add_argument("--xi", type=float, default=0.5, help="Paramètre de glissement")
    parser.add_argument("--q", type=float, default=1.0, help="Coefficient du dénominateur de τ(κ)")
    parser.add_argument("--out", type=Path, default=None, help="Répertoire de sortie")


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="Fichier clé = valeur")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="CLÉ=VALEUR",
                        help="Surcharge d'une clé (répétable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate.py",
        description="Fluide Johnson-Segalman : courbe d'écoulement, canal 1-D et chute de sphère.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rheology", help="Courbe τ(κ) et table des extrema en fonction de ξ")
    _add_js_arguments(p)
    p.add_argument("--xi-grid", type=_floats, default=list(DEFAULT_XI_GRID))
    p.add_argument("--samples", type=int, default=2000)

    p = sub.add_parser("shear1d", help="Canal de Couette plan jusqu'à l'état stationnaire")
    _add_js_arguments(p)
    p.add_argument("--wall-speed", type=float, required=True, help="Vitesse de la paroi (cisaillement moyen)")
    p.add_argument("--nodes", type=int, default=81)
    p.add_argument("--h-t", type=float, default=2e-4)
    p.add_argument("--t-max", type=float, default=60.0)
    p.add_argument("--tol", type=float, default=1e-7)

    p = sub.add_parser("sphere", help="Chute de sphère dans un cylindre")
    _add_run_arguments(p)
    p.add_argument("--resume", action="store_true", help="Reprendre au dernier point de reprise")

    p = sub.add_parser("sweep", help="Balayage d'un paramètre")
    _add_run_arguments(p)
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--values", type=_floats, required=True, help="Valeurs séparées par des virgules")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("mesh", help="Construit le maillage d'une configuration et affiche ses statistiques")
    _add_run_arguments(p)
    p.add_argument("--out", type=Path, default=None, help="Écrit mesh.txt et mesh.vtk dans ce répertoire")

    p = sub.add_parser("print-config", help="Affiche la configuration complète (valeurs par défaut incluses)")
    _add_run_arguments(p)

    p = sub.add_parser("analyze", help="Analyse des oscillations d'un timeseries.csv")
    p.add_argument("timeseries", type=Path)
    return parser


def _js_params(args: argparse.Namespace) -> JsParams:
    return JsParams(Wi=args.Wi, mu_s=args.mu_s, xi=args.xi, q=args.q)


def _cmd_rheology(args: argparse.Namespace) -> None:
    out = args.out or config.OUTPUT_DIR / "rheology"
    run_rheology(_js_params(args), out, args.xi_grid, args.samples)
    print(f"✅ curve.csv et extrema.csv écrits dans {out}")


def _cmd_shear1d(args: argparse.Namespace) -> None:
    out = args.out or config.OUTPUT_DIR / "shear1d"
    run = run_shear1d(_js_params(args), out, args.wall_speed, args.nodes, args.h_t, args.t_max, args.tol)
    if run.bands is not None:
        print(run.bands.to_frame().to_string(index=False))
    else:
        print("⚠️ État stationnaire non atteint : seul profile.csv a été écrit")


def _cmd_sphere(args: argparse.Namespace) -> None:
    cfg = RunConfig.from_file(args.config, args.overrides)
    result = run_falling_sphere(cfg, resume=args.resume)
    print(f"✅ {result.steps} pas, U final = {result.sphere.U:.6f} ({result.output_dir})")
    if result.report is not None:
        print(json.dumps(result.report.summary(), indent=2))


def _cmd_sweep(args: argparse.Namespace) -> None:
    cfg = RunConfig.from_file(args.config, args.overrides)
    summary = run_sweep(cfg, args.axis, args.values, args.out, args.workers)
    print(summary.to_string(index=False))


def _cmd_mesh(args: argparse.Namespace) -> None:
    cfg = RunConfig.from_file(args.config, args.overrides)
    derived = resolve_parameters(cfg)
    mesh = build_run_mesh(cfg, derived.alpha)
    print("📐 Maillage :")
    for key, value in mesh_report(mesh).items():
        print(f"  {key} : {value}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_mesh_text(mesh, args.out / "mesh.txt")
        write_vtk(args.out / "mesh.vtk", mesh, title="mesh")
        print(f"✅ mesh.txt et mesh.vtk écrits dans {args.out}")


def _cmd_print_config(args: argparse.Namespace) -> None:
    print(RunConfig.from_file(args.config, args.overrides).to_text(), end="")


def _cmd_analyze(args: argparse.Namespace) -> None:
    ts = pd.read_csv(args.timeseries)
    report = analyze_oscillations(ts["t"], ts["U"])
    print(json.dumps(report.summary(), indent=2))


COMMANDS = {
    "rheology": _cmd_rheology,
    "shear1d": _cmd_shear1d,
    "sphere": _cmd_sphere,
    "sweep": _cmd_sweep,
    "mesh": _cmd_mesh,
    "print-config": _cmd_print_config,
    "analyze": _cmd_analyze,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Point d'entrée ; renvoie le code de sortie."""
    logging.basicConfig(level=getattr(logging, config.LOG_LEVEL.upper(), logging.INFO))
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except SimulationError as e:
        print(str(e) if str(e).startswith("❌") else f"❌ {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        # JsParams invalides saisis en ligne de commande (pydantic)
        print(config.ERROR_MESSAGES["invalid_parameter"].format(detail=e), file=sys.stderr)
        return 1
    return 0
