"""
Tableau de bord Streamlit pour les calculs Johnson-Segalman.

Trois onglets : courbe d'écoulement, canal de Couette 1-D et exploration des
calculs de chute de sphère déjà écrits dans le répertoire de sortie.
"""

import json
import logging
from pathlib import Path

import pandas as pd
import streamlit as st

logger = logging.getLogger(__name__)

st.set_page_config(
    page_title="Sphère JS",
    page_icon="🌀",
    layout="wide",
    initial_sidebar_state="expanded",
)

try:
    from src.config import RunConfig, config
    from src.errors import SimulationError
    from src.oscillations import analyze_oscillations, detect_negative_wake
    from src.params import JsParams
    from src.rheology import classify_curve, sample_curve
    from src.shear1d import Channel1D, detect_bands, profile_frame, run_to_steady
    from src.simulation import run_falling_sphere
    from src.studies import extrema_table
except ImportError as e:
    st.error(f"Erreur d'importation: {e}")
    st.stop()

# Configuration du logging pour Streamlit
logging.basicConfig(level=getattr(logging, config.LOG_LEVEL.upper(), logging.INFO))


def initialize_session_state():
    if "channel" not in st.session_state:
        st.session_state.channel = None
    if "last_run" not in st.session_state:
        st.session_state.last_run = None


def sidebar_parameters() -> JsParams:
    """Paramètres rhéologiques saisis dans la barre latérale."""
    st.sidebar.header("⚙️ Paramètres du fluide")
    Wi = st.sidebar.number_input("Wi", min_value=0.01, value=0.45, step=0.05)
    mu_s = st.sidebar.number_input("μ_s", min_value=0.001, max_value=0.999, value=0.03, step=0.01, format="%.3f")
    xi = st.sidebar.slider("ξ", min_value=0.0, max_value=0.95, value=0.5, step=0.05)
    q = st.sidebar.number_input("q", min_value=0.1, value=1.0, step=0.5)

    st.sidebar.subheader("📁 Sorties")
    st.sidebar.info(f"Répertoire des calculs : `{config.OUTPUT_DIR}`")
    presets = config.get_preset_files()
    if presets:
        with st.sidebar.expander("Préréglages"):
            for path in presets:
                st.write(f"📄 {path.name}")
    return JsParams(Wi=Wi, mu_s=mu_s, xi=xi, q=q)


def display_rheology(p: JsParams):
    st.subheader("📈 Courbe d'écoulement τ(κ)")
    c = classify_curve(p)
    col1, col2, col3 = st.columns(3)
    col1.metric("Courbe", c.kind.value)
    col2.metric("κ_max", f"{c.kappa_max:.4f}" if c.kappa_max is not None else "—")
    col3.metric("κ_min", f"{c.kappa_min:.4f}" if c.kappa_min is not None else "—")

    kappa, tau, _ = sample_curve(p, 1500)
    st.line_chart(pd.DataFrame({"kappa": kappa, "tau": tau}), x="kappa", y="tau")

    st.subheader("📊 Extrema en fonction de ξ")
    st.dataframe(extrema_table(p, [round(0.1 * k, 1) for k in range(1, 10)]), use_container_width=True)


def display_channel(p: JsParams):
    st.subheader("📏 Canal de Couette plan")
    col1, col2, col3 = st.columns(3)
    wall_speed = col1.number_input("Vitesse de paroi", min_value=0.01, value=6.0)
    n_nodes = col2.number_input("Nœuds", min_value=11, value=41, step=10)
    t_max = col3.number_input("t_max", min_value=0.1, value=40.0)

    if st.button("▶️ Lancer jusqu'à l'état stationnaire", type="primary"):
        with st.spinner("Intégration en temps du canal..."):
            ch, converged = run_to_steady(Channel1D.at_rest(int(n_nodes), wall_speed, p), p, 5e-4,
                                          tol=1e-6, t_max=t_max)
            st.session_state.channel = (ch, converged, p)

    if st.session_state.channel is None:
        return
    ch, converged, params = st.session_state.channel
    if not converged:
        st.warning("⚠️ État stationnaire non atteint à t_max")
    profile = profile_frame(ch, params)
    st.line_chart(profile, x="y", y=["v"])
    st.line_chart(profile, x="y", y=["kappa"])
    if converged:
        try:
            st.dataframe(detect_bands(ch, params).to_frame(), use_container_width=True)
        except SimulationError as e:
            st.error(str(e))


def _run_directories() -> list:
    if not config.OUTPUT_DIR.exists():
        return []
    return sorted(p.parent for p in config.OUTPUT_DIR.rglob("timeseries.csv"))


def display_sphere():
    st.subheader("🌀 Chute de sphère")

    with st.expander("🚀 Lancer un calcul court"):
        presets = config.get_preset_files()
        names = [p.name for p in presets]
        if names:
            choice = st.selectbox("Préréglage", names)
            t_end = st.number_input("t_end", min_value=0.001, value=0.5)
            if st.button("▶️ Lancer"):
                path = presets[names.index(choice)]
                out = config.OUTPUT_DIR / f"app_{path.stem}"
                try:
                    cfg = RunConfig.from_file(path, [f"t_end={t_end}", f"output_dir={out}"])
                    with st.spinner("Calcul en cours..."):
                        result = run_falling_sphere(cfg)
                    st.session_state.last_run = result.output_dir
                    st.success(f"✅ {result.steps} pas, U final = {result.sphere.U:.6f}")
                except SimulationError as e:
                    st.error(str(e))
                    logger.error(f"Erreur de calcul : {e}")

    runs = _run_directories()
    if not runs:
        st.info("Aucun calcul trouvé : lancez `python simulate.py sphere --config data/configs/ci_light.conf`.")
        return
    default = runs.index(st.session_state.last_run) if st.session_state.last_run in runs else 0
    run_dir = Path(st.selectbox("Calcul", runs, index=default, format_func=lambda p: str(p)))

    ts = pd.read_csv(run_dir / "timeseries.csv")
    if ts.empty:
        st.warning("⚠️ Série vide")
        return
    col1, col2, col3 = st.columns(3)
    col1.metric("t final", f"{ts['t'].iloc[-1]:.3f}")
    col2.metric("U final", f"{ts['U'].iloc[-1]:.5f}")
    col3.metric("min λ(c)", f"{ts['min_eig_c'].min():.3e}")
    st.line_chart(ts, x="t", y="U")

    report_file = run_dir / "oscillations.json"
    if report_file.exists():
        st.json(json.loads(report_file.read_text(encoding="utf-8")))
    elif len(ts) >= 100:
        st.json(analyze_oscillations(ts["t"], ts["U"]).summary())

    for probe in sorted(run_dir.glob("probes_*.csv")):
        with st.expander(f"🔍 Sonde {probe.stem.removeprefix('probes_')}"):
            st.line_chart(pd.read_csv(probe), x="t", y=["u_r", "u_z"])

    axis_file = run_dir / "axis_profile.csv"
    if axis_file.exists():
        axis = pd.read_csv(axis_file)
        if not axis.empty:
            wake = detect_negative_wake(axis)
            if wake.first_negative_time is not None:
                st.warning(
                    f"Sillage négatif de t={wake.first_negative_time:.3f} à t={wake.last_negative_time:.3f}"
                    f" (disparaît : {wake.disappears})"
                )
            st.line_chart(wake.per_time, x="t", y="min_fall_velocity")


def main():
    initialize_session_state()
    st.title(config.APP_TITLE)
    st.markdown(config.APP_DESCRIPTION)

    try:
        p = sidebar_parameters()
    except ValueError as e:
        st.error(config.ERROR_MESSAGES["invalid_parameter"].format(detail=e))
        st.stop()

    tab1, tab2, tab3 = st.tabs(["📈 Rhéologie", "📏 Cisaillement 1D", "🌀 Chute de sphère"])
    with tab1:
        display_rheology(p)
    with tab2:
        display_channel(p)
    with tab3:
        display_sphere()

    st.markdown("---")
    st.markdown("🌀 **JS Falling Sphere** | numpy, scipy, triangle, pandas, pydantic et Streamlit")


if __name__ == "__main__":
    try:
        main()
    except Exception as e:
        st.error(f"Erreur fatale de l'application: {str(e)}")
        logger.error(f"Erreur fatale: {e}")
