"""
Fixtures partagées des tests.

Les calculs longs sont marqués ``slow`` et ne s'exécutent que si
``SIM_RUN_SLOW=1``.
"""

import os

import pytest

from src.mesh import build_rectangle, build_sphere_in_cylinder
from src.params import BANDING_PARAMS, JsParams


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: calcul de chute de sphère long (SIM_RUN_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    if os.getenv("SIM_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="calcul long : définir SIM_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def banding_params() -> JsParams:
    return BANDING_PARAMS


@pytest.fixture
def newtonian_params() -> JsParams:
    return JsParams(Re=0.0325, Wi=0.45, mu_s=0.999, xi=0.0)


@pytest.fixture(scope="session")
def coarse_sphere_mesh():
    return build_sphere_in_cylinder(4.115, height=8.0, h_near=0.3, h_far=1.5)


@pytest.fixture(scope="session")
def unit_square_mesh():
    """Carré [0, 1]² dont le côté r = 0 est l'axe."""
    return build_rectangle(0.0, 1.0, 0.0, 1.0, 4, 4)
