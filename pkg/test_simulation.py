"""
Tests de l'orchestration : paramètres dérivés, configuration, analyse des séries,
points de reprise et courts calculs de chute de sphère.
"""

import numpy as np
import pandas as pd
import pytest

from src.config import DimensionalBlock, RunConfig, config
from src.errors import CheckpointError, ConfigurationError, InvalidParameterError, ProbeOutsideDomainError
from src.fem import FieldState
from src.io_utils import CsvAppender, latest_checkpoint, read_checkpoint, truncate_csv, write_checkpoint
from src.mesh import build_rectangle
from src.oscillations import analyze_oscillations, detect_negative_wake
from src.simulation import build_run_mesh, derive_dimensionless, resolve_parameters, run_falling_sphere, run_probe_series
from src.sphere import SphereState, wall_correction


def _unit_block(**updates) -> DimensionalBlock:
    values = dict(r_s=1.0, r_c=4.115, rho_s=2.0, rho_f=1.0, eta_s=0.5, eta_p=0.5, lam=1.0, g=9.0, xi=0.7)
    values.update(updates)
    return DimensionalBlock(**values)


def _tiny_config(tmp_path, name: str, **updates) -> RunConfig:
    fields = dict(height=6.0, h_near=0.4, h_far=1.5, t_end=0.01, output_dir=str(tmp_path / name))
    fields.update(updates)
    return RunConfig.default(**fields)


class TestDerivedParameters:
    def test_unit_scaling(self):
        derived = derive_dimensionless(_unit_block(), K=1.0)
        # U_N = 2 · 1 · (2 − 1) · 9 / (9 · 1 · 1)
        assert derived.U_N == pytest.approx(2.0)
        assert derived.params.Re == pytest.approx(2.0)
        assert derived.params.Wi == pytest.approx(2.0)
        assert derived.params.mu_s == pytest.approx(0.5)
        assert derived.rho_ratio == pytest.approx(2.0)
        assert derived.alpha == pytest.approx(4.115)

    def test_doubling_gravity(self):
        base = derive_dimensionless(_unit_block())
        double = derive_dimensionless(_unit_block(g=18.0))
        assert double.U_N == pytest.approx(2.0 * base.U_N)
        assert double.params.Re == pytest.approx(2.0 * base.params.Re)
        assert double.params.Wi == pytest.approx(2.0 * base.params.Wi)
        assert double.params.mu_s == pytest.approx(base.params.mu_s)

    def test_reference_groups_recovered(self):
        Re, Wi, mu_s, rho_ratio, alpha = 0.0325, 0.45, 0.03, 6.3, 4.115
        K = wall_correction(alpha)
        U_N = Re
        block = DimensionalBlock(
            r_s=1.0, r_c=alpha, rho_s=rho_ratio, rho_f=1.0, eta_s=mu_s, eta_p=1.0 - mu_s,
            lam=Wi / U_N, g=9.0 * K * U_N / (2.0 * (rho_ratio - 1.0)), xi=0.7,
        )
        derived = derive_dimensionless(block)
        assert derived.params.Re == pytest.approx(Re, rel=1e-12)
        assert derived.params.Wi == pytest.approx(Wi, rel=1e-12)
        assert derived.params.mu_s == pytest.approx(mu_s, rel=1e-12)
        assert derived.rho_ratio == pytest.approx(rho_ratio, rel=1e-12)
        assert derived.K == pytest.approx(K, rel=1e-12)

    def test_light_sphere_rejected(self):
        with pytest.raises(InvalidParameterError):
            derive_dimensionless(_unit_block(rho_s=1.0))

    def test_resolve_dimensionless_block(self):
        derived = resolve_parameters(RunConfig.default())
        assert derived.params.Wi == 0.45
        assert derived.K == pytest.approx(wall_correction(4.115))


class TestRunConfig:
    def test_presets_parse(self):
        presets = config.get_preset_files()
        assert presets
        for path in presets:
            cfg = RunConfig.from_file(path)
            assert cfg.dimensionless is not None or cfg.dimensional is not None

    def test_overrides(self):
        cfg = RunConfig.from_file(None, ["xi=0.5", "t_end=2", "probe.extra=2.0, 1.0"])
        assert cfg.dimensionless.xi == 0.5
        assert cfg.t_end == 2.0
        assert cfg.probes["extra"] == (2.0, 1.0)

    def test_mixed_blocks_rejected(self):
        with pytest.raises(ConfigurationError):
            RunConfig.from_flat({"Re": "0.1", "r_s": "1.0"})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigurationError):
            RunConfig.from_file(None, ["viscosity=3"])

    def test_override_without_equals(self):
        with pytest.raises(ConfigurationError):
            RunConfig.from_file(None, ["xi"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            RunConfig.from_file(tmp_path / "absent.conf")

    def test_flat_round_trip(self):
        cfg = RunConfig.default(K=1.5, output_dir="runs/a")
        assert RunConfig.from_flat(cfg.to_flat()) == cfg

    def test_text_round_trip(self, tmp_path):
        cfg = RunConfig.default(t_end=3.0)
        path = tmp_path / "run.conf"
        path.write_text(cfg.to_text(), encoding="utf-8")
        assert RunConfig.from_file(path) == cfg

    def test_dimensional_file(self, tmp_path):
        path = tmp_path / "dim.conf"
        path.write_text(
            "r_s = 1\nr_c = 4.115\nrho_s = 2\nrho_f = 1\neta_s = 0.5\neta_p = 0.5\nlam = 1\ng = 9\nxi = 0.3\n",
            encoding="utf-8",
        )
        cfg = RunConfig.from_file(path)
        assert cfg.dimensional is not None and cfg.dimensional.xi == 0.3

    def test_axis_value(self):
        cfg = RunConfig.default()
        assert cfg.with_axis_value("xi", 0.3).dimensionless.xi == 0.3
        assert cfg.with_axis_value("alpha", 6.115).dimensionless.alpha == 6.115
        with pytest.raises(ConfigurationError):
            cfg.with_axis_value("Wi", 1.0)

    def test_axis_value_on_dimensional_block(self):
        cfg = RunConfig.build(dimensional=_unit_block())
        assert cfg.with_axis_value("alpha", 6.0).dimensional.r_c == pytest.approx(6.0)
        assert cfg.with_axis_value("rho_ratio", 3.0).dimensional.rho_s == pytest.approx(3.0)

    def test_invalid_probe_name(self):
        with pytest.raises(ConfigurationError):
            RunConfig.default(probes={"bad name": (2.0, 0.0)})


class TestOscillations:
    def test_constant_series(self):
        t = np.linspace(0.0, 10.0, 500)
        report = analyze_oscillations(t, np.full_like(t, 0.3))
        assert report.peak_times == []
        assert not report.sustained
        assert report.asymmetry == 1.0

    def test_sine_wave(self):
        t = np.arange(0.0, 20.0, 0.01)
        report = analyze_oscillations(t, 1.0 + 0.2 * np.sin(np.pi * t))
        assert report.sustained
        assert report.period == pytest.approx(2.0, rel=1e-2)
        assert report.asymmetry == pytest.approx(1.0, rel=5e-2)
        assert report.amplitude == pytest.approx(0.4, rel=5e-2)

    def test_decaying_wave(self):
        t = np.arange(0.0, 20.0, 0.01)
        report = analyze_oscillations(t, 1.0 + np.exp(-t / 3.0) * np.sin(np.pi * t))
        assert not report.sustained

    def test_sawtooth(self):
        t = np.arange(0.0, 10.0, 0.001)
        phase = np.mod(t, 1.0)
        # chute lente sur 0.8, remontée rapide sur 0.2
        U = np.where(phase < 0.8, 1.0 - phase / 0.8, (phase - 0.8) / 0.2)
        report = analyze_oscillations(t, U)
        assert report.sustained
        assert report.asymmetry == pytest.approx(4.0, rel=5e-2)
        assert report.period == pytest.approx(1.0, rel=1e-2)

    def test_too_few_samples(self):
        with pytest.raises(InvalidParameterError):
            analyze_oscillations(np.arange(10.0), np.zeros(10))

    def test_summary_has_no_lists(self):
        t = np.arange(0.0, 20.0, 0.01)
        summary = analyze_oscillations(t, np.sin(np.pi * t)).summary()
        assert "peak_times" not in summary
        assert {"amplitude", "period", "asymmetry", "sustained"} <= set(summary)


def test_negative_wake_detection():
    axis = pd.DataFrame(
        {
            "t": [1.0, 1.0, 2.0, 2.0, 3.0, 3.0],
            "z": [-2.0, 2.0, -2.0, 2.0, -2.0, 2.0],
            "u_z": [0.0] * 6,
            "u_z_lab": [-0.5, -0.1, 0.3, 0.05, 0.2, -0.2],
        }
    )
    report = detect_negative_wake(axis)
    assert report.first_negative_time == 2.0
    assert report.last_negative_time == 2.0
    assert report.disappears
    assert list(report.per_time["negative"]) == [False, True, False]


class TestCheckpoints:
    def _state(self, mesh):
        rng = np.random.default_rng(7)
        n_u = mesh.n_vertices + mesh.n_edges
        return FieldState(u=rng.normal(size=(n_u, 2)), p=rng.normal(size=mesh.n_vertices),
                          c=rng.uniform(0.5, 1.5, size=(mesh.n_vertices, 4)), t=0.25)

    def test_round_trip(self, unit_square_mesh, tmp_path):
        state = self._state(unit_square_mesh)
        sphere = SphereState(U=0.3, dU=-0.1, K=1.9, rho_ratio=6.3)
        path = write_checkpoint(tmp_path / "checkpoint_250.bin", 250, state, sphere, unit_square_mesh)
        back = read_checkpoint(path, unit_square_mesh)
        assert back.step == 250
        assert back.sphere == sphere
        assert back.state.t == 0.25
        np.testing.assert_array_equal(back.state.u, state.u)
        np.testing.assert_array_equal(back.state.p, state.p)
        np.testing.assert_array_equal(back.state.c, state.c)
        assert not (tmp_path / "checkpoint_250.bin.tmp").exists()

    def test_corruption_detected(self, unit_square_mesh, tmp_path):
        state = self._state(unit_square_mesh)
        path = write_checkpoint(tmp_path / "checkpoint_1.bin", 1, state, SphereState.at_rest(1.0, 2.0),
                                unit_square_mesh)
        data = bytearray(path.read_bytes())
        data[len(data) // 2] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError):
            read_checkpoint(path)

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "checkpoint_1.bin"
        path.write_bytes(b"JSF")
        with pytest.raises(CheckpointError):
            read_checkpoint(path)

    def test_mesh_mismatch(self, unit_square_mesh, tmp_path):
        state = self._state(unit_square_mesh)
        path = write_checkpoint(tmp_path / "checkpoint_1.bin", 1, state, SphereState.at_rest(1.0, 2.0),
                                unit_square_mesh)
        with pytest.raises(CheckpointError):
            read_checkpoint(path, build_rectangle(0.0, 2.0, 0.0, 1.0, 4, 4))

    def test_latest_uses_numeric_order(self, tmp_path):
        assert latest_checkpoint(tmp_path) is None
        for step in (9, 100, 10):
            (tmp_path / f"checkpoint_{step}.bin").write_bytes(b"")
        assert latest_checkpoint(tmp_path).name == "checkpoint_100.bin"


def test_truncate_csv(tmp_path):
    path = tmp_path / "series.csv"
    with CsvAppender(path, ["t", "U"], flush_every=2) as out:
        for i in range(5):
            out.append(0.1 * i, float(i))
    truncate_csv(path, 0.2)
    assert pd.read_csv(path)["U"].tolist() == [0.0, 1.0, 2.0]


class TestShortRuns:
    def test_run_from_rest(self, tmp_path):
        cfg = _tiny_config(tmp_path, "run")
        result = run_falling_sphere(cfg)
        assert result.steps == 10
        assert len(result.timeseries) == 10
        assert result.report is None
        U = result.timeseries["U"].to_numpy()
        assert np.all(U > 0.0) and U[-1] > U[0]
        assert result.timeseries["min_eig_c"].min() > 0.0
        for name in ("timeseries.csv", "mesh.txt", "config.conf", "probes_x1.csv", "probes_x2.csv"):
            assert (result.output_dir / name).exists()

    def test_snapshots_carry_gradients(self, tmp_path):
        cfg = _tiny_config(tmp_path, "snap", snapshot_every=5)
        result = run_falling_sphere(cfg)
        assert sorted(p.name for p in result.output_dir.glob("fields_*.vtk")) == ["fields_10.vtk", "fields_5.vtk"]
        text = (result.output_dir / "fields_10.vtk").read_text(encoding="utf-8")
        for name in ("VECTORS velocity", "SCALARS dr_ur", "SCALARS tau_rz", "SCALARS min_eig_c"):
            assert name in text

    def test_resume_matches_unbroken_run(self, tmp_path):
        cfg = _tiny_config(tmp_path, "full", t_end=0.02, checkpoint_every=10)
        mesh = build_run_mesh(cfg, resolve_parameters(cfg).alpha)
        full = run_falling_sphere(cfg, mesh=mesh)

        first = _tiny_config(tmp_path, "split", t_end=0.01, checkpoint_every=10)
        run_falling_sphere(first, mesh=mesh)
        assert (tmp_path / "split" / "checkpoint_10.bin").exists()
        second = _tiny_config(tmp_path, "split", t_end=0.02, checkpoint_every=10)
        resumed = run_falling_sphere(second, resume=True, mesh=mesh)

        assert resumed.steps == 20
        assert len(resumed.timeseries) == 20
        assert resumed.sphere.U == pytest.approx(full.sphere.U, abs=1e-8)
        np.testing.assert_allclose(resumed.timeseries["U"], full.timeseries["U"], atol=1e-8)

    def test_probe_inside_sphere_rejected(self, tmp_path):
        cfg = _tiny_config(tmp_path, "bad", probes={"inner": (0.2, 0.0)})
        with pytest.raises(ProbeOutsideDomainError):
            run_falling_sphere(cfg)

    def test_side_wall_probe_follows_lagged_speed(self, tmp_path):
        cfg = _tiny_config(tmp_path, "wall", probes={"wall": (4.115, 0.5)}, probe_every=1)
        result = run_falling_sphere(cfg)
        probe = pd.read_csv(result.output_dir / "probes_wall.csv")
        U = result.timeseries["U"].to_numpy()
        assert probe["u_z"].iloc[0] == pytest.approx(0.0, abs=1e-14)
        np.testing.assert_allclose(probe["u_z"].to_numpy()[1:], U[:-1], rtol=1e-9, atol=1e-12)

    def test_probe_series_replaces_configured_probes(self, tmp_path):
        cfg = _tiny_config(tmp_path, "series", probe_every=5)
        series = run_probe_series(cfg, {"near": (1.5, 0.0), "wall": (4.115, 1.0)})
        assert set(series) == {"near", "wall"}
        for frame in series.values():
            assert list(frame.columns) == ["t", "u_r", "u_z", "p"]
            assert len(frame) == 2
        assert not (tmp_path / "series" / "probes_x1.csv").exists()
