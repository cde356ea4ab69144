"""
Tests du noyau tensoriel : rotation, équilibre, pas de Lyapunov.
"""

import numpy as np
import pytest

from src.errors import PositivityLossError, StepTooLargeError
from src.params import JsParams
from src.tensor_core import (
    RR,
    RZ,
    TT,
    ZZ,
    AxiTensor,
    VelGrad,
    equilibrium_array,
    equilibrium_conformation,
    gs_rotation,
    is_spd_batch,
    lyapunov_residual,
    lyapunov_step,
    lyapunov_step_batch,
    min_eigenvalue,
    stress_from_conformation,
)


@pytest.fixture
def js() -> JsParams:
    return JsParams(Re=0.0325, Wi=0.45, mu_s=0.03, xi=0.7)


def _random_spd(rng, n, max_condition=1e4):
    """Tenseurs SPD aléatoires de conditionnement ≤ max_condition (partie plane)."""
    low = 10.0 ** rng.uniform(-2.0, 1.0, n)
    high = low * 10.0 ** rng.uniform(0.0, np.log10(max_condition), n)
    angle = rng.uniform(0.0, np.pi, n)
    cos, sin = np.cos(angle), np.sin(angle)
    c = np.empty((n, 4))
    c[:, RR] = high * cos**2 + low * sin**2
    c[:, RZ] = (high - low) * cos * sin
    c[:, ZZ] = high * sin**2 + low * cos**2
    c[:, TT] = 10.0 ** rng.uniform(-2.0, 1.0, n)
    return c


def _oldroyd_b_step(c_foot, L, hoop, p, h_t):
    """Pas d'Euler implicite convecté supérieur écrit sous forme de Kronecker 4×4."""
    out = np.empty_like(c_foot)
    k = 1.0 + p.Wi / h_t
    for i in range(c_foot.shape[0]):
        M = k * np.eye(4) - p.Wi * (np.kron(L[i], np.eye(2)) + np.kron(np.eye(2), L[i]))
        C = p.c_eq * np.eye(2) + (p.Wi / h_t) * np.array([[c_foot[i, RR], c_foot[i, RZ]], [c_foot[i, RZ], c_foot[i, ZZ]]])
        c = np.linalg.solve(M, C.ravel()).reshape(2, 2)
        out[i, RR], out[i, RZ], out[i, ZZ] = c[0, 0], 0.5 * (c[0, 1] + c[1, 0]), c[1, 1]
        out[i, TT] = (p.c_eq + (p.Wi / h_t) * c_foot[i, TT]) / (k - 2.0 * p.Wi * hoop[i])
    return out


class TestRotation:
    def test_upper_convected_limit(self):
        L = VelGrad(np.array([[0.3, 1.2], [-0.4, -0.3]]))
        R, R_tt = gs_rotation(VelGrad(L.L, hoop=0.7), 1.0)
        np.testing.assert_allclose(R, L.L)
        assert R_tt == pytest.approx(0.7)

    def test_corotational_limit_is_skew(self):
        L = np.array([[0.3, 1.2], [-0.4, -0.3]])
        R, R_tt = gs_rotation(VelGrad(L, hoop=0.7), 0.0)
        np.testing.assert_allclose(R, 0.5 * (L - L.T))
        assert R_tt == 0.0

    def test_shear_is_divergence_free(self):
        assert VelGrad.shear(2.0).divergence() == 0.0


class TestEquilibrium:
    def test_equilibrium_value(self, js):
        c = equilibrium_conformation(js)
        assert c.rr == c.zz == c.tt == pytest.approx(js.mu_p / (js.a * js.Wi))
        assert c.rz == 0.0

    def test_equilibrium_stress_vanishes(self, js):
        tau = stress_from_conformation(equilibrium_conformation(js), js)
        assert tau.as_array() == pytest.approx(np.zeros(4), abs=1e-15)

    def test_equilibrium_is_fixed_point_at_rest(self, js):
        c = equilibrium_conformation(js)
        c_new = lyapunov_step(c, VelGrad(np.zeros((2, 2))), js, 1e-3)
        np.testing.assert_allclose(c_new.as_array(), c.as_array(), rtol=1e-14)

    def test_min_eigenvalue(self):
        assert min_eigenvalue(AxiTensor(1.0, 0.0, 3.0, 0.5)) == pytest.approx(0.5)
        assert min_eigenvalue(AxiTensor(2.0, 1.0, 2.0, 5.0)) == pytest.approx(1.0)


class TestLyapunovStep:
    def test_random_steps_stay_spd(self):
        rng = np.random.default_rng(42)
        n = 10_000
        for Wi, xi in ((0.45, 0.7), (0.5, 0.2), (2.0, 0.0)):
            p = JsParams(Wi=Wi, mu_s=0.03, xi=xi)
            c_foot = _random_spd(rng, n)
            eig = np.linalg.eigvalsh(np.stack([c_foot[:, [RR, RZ]], c_foot[:, [RZ, ZZ]]], axis=1))
            assert (eig[:, 1] / eig[:, 0]).max() <= 1e4 * (1.0 + 1e-9)
            L = rng.uniform(-5.0, 5.0, size=(n, 2, 2))
            hoop = rng.uniform(-5.0, 5.0, n)
            c_new = lyapunov_step_batch(c_foot, L, hoop, p, 1e-3)
            assert np.all(is_spd_batch(c_new))
            assert lyapunov_residual(c_new, c_foot, L, hoop, p, 1e-3).max() <= 1e-12

    def test_oldroyd_b_limit_matches_upper_convected_step(self):
        p = JsParams(Wi=0.5, mu_s=0.5, xi=0.0)
        rng = np.random.default_rng(3)
        n, h_t = 200, 0.1
        c_foot = _random_spd(rng, n)
        L = rng.normal(scale=0.5, size=(n, 2, 2))
        hoop = rng.normal(scale=0.5, size=n)
        expected = _oldroyd_b_step(c_foot, L, hoop, p, h_t)
        c_new = lyapunov_step_batch(c_foot, L, hoop, p, h_t)
        scale = np.abs(expected).max(axis=1, keepdims=True)
        assert np.all(np.abs(c_new - expected) <= 1e-14 * scale)

    def test_rest_relaxes_geometrically_to_equilibrium(self, js):
        rng = np.random.default_rng(11)
        h_t = 0.1
        c = _random_spd(rng, 1)
        c_eq = equilibrium_array(js, 1)
        rate = js.Wi / (js.Wi + h_t)
        error = np.abs(c - c_eq).max()
        for _ in range(50):
            c = lyapunov_step_batch(c, np.zeros((1, 2, 2)), np.zeros(1), js, h_t)
            new_error = np.abs(c - c_eq).max()
            assert new_error == pytest.approx(rate * error, rel=1e-9)
            error = new_error
        for _ in range(1000):
            c = lyapunov_step_batch(c, np.zeros((1, 2, 2)), np.zeros(1), js, h_t)
        np.testing.assert_allclose(c, c_eq, rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("kappa", [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0])
    def test_homogeneous_shear_fixed_point(self, js, kappa):
        # Un pas de taille infinie donne directement l'état stationnaire
        c = lyapunov_step(equilibrium_conformation(js), VelGrad.shear(kappa), js, 1e12)
        tau = stress_from_conformation(c, js)
        expected = js.mu_p * kappa / (1.0 + js.beta * js.Wi**2 * kappa**2)
        assert tau.rz == pytest.approx(expected, rel=1e-8)
        assert tau.rr == pytest.approx(js.Wi * (js.a + 1.0) * kappa * expected, rel=1e-8)
        assert tau.zz == pytest.approx(js.Wi * (js.a - 1.0) * kappa * expected, rel=1e-8)
        assert tau.tt == pytest.approx(0.0, abs=1e-10)

    def test_point_and_batch_agree(self, js):
        rng = np.random.default_rng(1)
        c_foot = _random_spd(rng, 5)
        L = rng.normal(size=(5, 2, 2))
        hoop = rng.normal(size=5)
        batch = lyapunov_step_batch(c_foot, L, hoop, js, 1e-3)
        for i in range(5):
            point = lyapunov_step(AxiTensor.from_array(c_foot[i]), VelGrad(L[i], hoop[i]), js, 1e-3)
            np.testing.assert_allclose(point.as_array(), batch[i], rtol=1e-13)

    def test_singular_system_raises(self, js):
        h_t = 1e-3
        s = (1.0 + js.Wi / h_t) / (2.0 * js.Wi * js.a)
        with pytest.raises(StepTooLargeError):
            lyapunov_step_batch(equilibrium_array(js, 1), (s * np.eye(2))[None], np.zeros(1), js, h_t)

    def test_positivity_loss_is_reported(self, js):
        h_t = 1e-3
        s = 1.5 * (1.0 + js.Wi / h_t) / (2.0 * js.Wi * js.a)
        with pytest.raises(PositivityLossError) as info:
            lyapunov_step_batch(equilibrium_array(js, 1), (s * np.eye(2))[None], np.zeros(1), js, h_t)
        assert info.value.nodes == [0]
        assert info.value.min_eigenvalue < 0.0

    def test_unchecked_step_returns_raw_values(self, js):
        h_t = 1e-3
        s = 1.5 * (1.0 + js.Wi / h_t) / (2.0 * js.Wi * js.a)
        c = lyapunov_step_batch(equilibrium_array(js, 1), (s * np.eye(2))[None], np.zeros(1), js, h_t, check=False)
        assert c[0, RR] < 0.0
