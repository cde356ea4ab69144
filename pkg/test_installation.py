"""
Script de vérification de l'installation.

Contrôle les dépendances, la configuration, les préréglages et exécute un
très court calcul de chaque type. Lancer avec ``python test_installation.py``.
"""

import tempfile
from pathlib import Path


def check_imports():
    """Vérifie l'importation des dépendances et des modules du projet."""
    print("🔍 Test des importations...")

    try:
        import numpy
        print(f"✅ NumPy {numpy.__version__}")

        import scipy
        print(f"✅ SciPy {scipy.__version__}")

        import triangle
        print("✅ triangle")

        import pandas
        print(f"✅ pandas {pandas.__version__}")

        import pydantic
        print(f"✅ pydantic {pydantic.VERSION}")

        import streamlit
        print("✅ Streamlit")

        import dotenv
        print("✅ Python-dotenv")

        from src import cli, fem, mesh, rheology, shear1d, simulation, sphere, studies, tensor_core
        print("✅ Modules du projet")

        return True

    except ImportError as e:
        print(f"❌ Erreur d'importation: {e}")
        return False


def check_configuration():
    """Vérifie la configuration et les préréglages."""
    print("\n🔧 Test de la configuration...")

    try:
        from src.config import RunConfig, config

        if not config.validate_config():
            return False
        presets = config.get_preset_files()
        print(f"📄 {len(presets)} préréglage(s)")
        for path in presets:
            RunConfig.from_file(path)
            print(f"✅ {path.name}")
        return True

    except Exception as e:
        print(f"❌ Erreur de configuration: {e}")
        return False


def check_rheology():
    """Courbe de référence : doit être non monotone."""
    print("\n📈 Test de la rhéologie...")

    try:
        from src.params import JsParams
        from src.rheology import classify_curve

        c = classify_curve(JsParams(Wi=0.45, mu_s=0.03, xi=0.5))
        print(f"✅ {c.kind.value} : κ_max={c.kappa_max:.4f}, κ_min={c.kappa_min:.4f}")
        return c.is_non_monotone

    except Exception as e:
        print(f"❌ Erreur de rhéologie: {e}")
        return False


def check_sphere_run():
    """Quelques pas de chute de sphère sur un maillage grossier."""
    print("\n🌀 Test d'un court calcul de chute de sphère...")

    try:
        from src.config import RunConfig
        from src.simulation import run_falling_sphere

        with tempfile.TemporaryDirectory() as tmp:
            cfg = RunConfig.default(height=6.0, h_near=0.4, h_far=1.5, t_end=0.005, output_dir=tmp)
            result = run_falling_sphere(cfg)
            print(f"✅ {result.steps} pas, U = {result.sphere.U:.6f}")
        return result.sphere.U > 0.0

    except Exception as e:
        print(f"❌ Erreur du calcul: {e}")
        return False


def check_streamlit_app():
    """Vérifie que le tableau de bord est présent."""
    print("\n🌐 Test de l'application Streamlit...")

    app_file = Path(__file__).parent / "app.py"
    if app_file.exists():
        print("✅ Fichier app.py trouvé")
        return True
    print("❌ Fichier app.py manquant")
    return False


def main():
    """Fonction principale de vérification."""
    print("🧪 Vérification de l'installation")
    print("=" * 50)

    checks = [
        ("Importations", check_imports),
        ("Configuration", check_configuration),
        ("Rhéologie", check_rheology),
        ("Chute de sphère", check_sphere_run),
        ("Application Streamlit", check_streamlit_app),
    ]

    results = []
    for name, func in checks:
        try:
            results.append((name, func()))
        except Exception as e:
            print(f"❌ Erreur dans le test {name}: {e}")
            results.append((name, False))

    print("\n" + "=" * 50)
    print("📊 RÉSUMÉ DES TESTS")
    print("=" * 50)

    passed = 0
    for name, result in results:
        status = "✅ PASSÉ" if result else "❌ ÉCHEC"
        print(f"{name:<25} {status}")
        if result:
            passed += 1

    print(f"\n🎯 Résultat: {passed}/{len(results)} tests passés")

    if passed == len(results):
        print("🎉 Installation correcte.")
        print("\n🚀 Pour commencer:")
        print("   python simulate.py rheology")
        print("   streamlit run app.py")
    else:
        print("⚠️ Certains tests ont échoué. Vérifiez les erreurs ci-dessus.")
        print("\n💡 Conseils de dépannage:")
        print("   1. Installez les dépendances: pip install -r requirements.txt")
        print("   2. Vérifiez les variables SIM_* du fichier .env")


if __name__ == "__main__":
    main()
