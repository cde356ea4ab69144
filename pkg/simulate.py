"""
Point d'entrée en ligne de commande.

Exemples :
    python simulate.py rheology --xi 0.5
    python simulate.py sphere --config data/configs/ci_light.conf
    python simulate.py sweep --config data/configs/oscillating.conf --axis xi --values 0.4,0.6,0.8
"""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
