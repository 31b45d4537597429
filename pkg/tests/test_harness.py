import json
import math

import numpy as np
import pytest

from hypocns import Grid, PhysParams
from hypocns.diagnostics import NormTrajectory
from hypocns.errors import InsufficientSamples, MalformedReport, NonPositiveValue, SigmaTooLarge
from hypocns.harness import (
    ExperimentConfig,
    compare_rates,
    fit_power_law,
    load_state,
    make_initial,
    run_experiment,
    save_state,
    validity_tmax,
)
from hypocns.littlewood_paley import NormRequest, norm


def traj_from(t, y, name="y"):
    tr = NormTrajectory([name])
    for ti, yi in zip(t, y):
        tr.append(ti, {name: yi})
    return tr


class TestInitial:
    def test_bump_integral(self):
        g = Grid(128, 40.0)
        s = make_initial("gaussian_bump", 0.7, 1.5, g)
        integral = np.sum(s.a.physical) * g.dx**2
        assert integral == pytest.approx(0.7 * 2 * math.pi * 1.5**2, rel=1e-10)

    def test_mean_zero(self):
        g = Grid(64, 40.0)
        s = make_initial("mean_zero_bump", 0.7, 1.5, g)
        assert all(f.coeffs[0, 0] == 0 for f in s.fields)

    def test_sigma_too_large(self):
        with pytest.raises(SigmaTooLarge):
            make_initial("gaussian_bump", 1.0, 3.0, Grid(32, 40.0))

    def test_besov_embedding(self):
        # B^{-1}_{2,inf} <= C ||.||_{L^1}: the ratio settles as the box grows
        ratios = []
        for L in (40.0, 80.0, 160.0):
            g = Grid(int(L * 1.6), L)
            a = make_initial("mean_zero_bump", 1e-2, 2.0, g).a
            l1 = np.sum(np.abs(make_initial("gaussian_bump", 1e-2, 2.0, g).a.physical)) * g.dx**2
            b = norm(a, NormRequest.Besov(-1, math.inf))
            assert np.isfinite(b)
            ratios.append(b / l1)
        assert max(ratios) <= 1.0
        assert max(ratios) / min(ratios) < 1.5

    def test_random_band_seeded(self):
        g = Grid(32, 2 * np.pi)
        s1 = make_initial("random_band", 0.1, 0.0, g, seed=7)
        s2 = make_initial("random_band", 0.1, 0.0, g, seed=7)
        s3 = make_initial("random_band", 0.1, 0.0, g, seed=8)
        assert all(np.array_equal(f.coeffs, h.coeffs) for f, h in zip(s1.fields, s2.fields))
        assert not np.array_equal(s1.a.coeffs, s3.a.coeffs)
        assert np.max(np.abs(s1.a.physical)) == pytest.approx(0.1)

    def test_incompressible_mode_is_divergence_free(self):
        from hypocns.spectral import divergence

        g = Grid(32, 2 * np.pi)
        s = make_initial("incompressible_mode", 0.5, 0.0, g, mode=(2, 3))
        assert divergence(s.u).coeff_norm() <= 1e-13 * s.u[0].coeff_norm()
        assert s.a.coeff_norm() == 0


class TestFit:
    def test_exact_power(self):
        t = np.linspace(0, 50, 30)
        fr = fit_power_law(traj_from(t, (1 + t) ** -2.0), "y", [0, 50], -2.0, 0.01)
        assert fr.exponent == pytest.approx(-2.0, abs=1e-10)
        assert fr.verdict and fr.r_squared == pytest.approx(1.0)

    def test_intercept(self):
        t = np.linspace(1, 9, 12)
        fr = fit_power_law(traj_from(t, 5 / (1 + t)), "y", [1, 9])
        assert fr.exponent == pytest.approx(-1.0, abs=1e-12)
        assert fr.intercept == pytest.approx(math.log(5), abs=1e-12)
        assert fr.verdict is None

    def test_insufficient(self):
        t = np.arange(20.0)
        with pytest.raises(InsufficientSamples):
            fit_power_law(traj_from(t, 1 / (1 + t)), "y", [0, 6])

    def test_nonpositive(self):
        t = np.arange(20.0)
        with pytest.raises(NonPositiveValue):
            fit_power_law(traj_from(t, np.zeros(20)), "y", [0, 19])

    def test_verdict_needs_r2(self, rng):
        t = np.linspace(0, 100, 60)
        y = (1 + t) ** -1.0 * np.exp(rng.normal(0, 0.5, t.size))
        fr = fit_power_law(traj_from(t, y), "y", [0, 100], -1.0, 10.0)
        assert 0 <= fr.r_squared < 0.99 and fr.verdict is False


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_mapping({"mode": "nonlinear", "bogus": 1})

    def test_defaults_respect_validity(self):
        cfg = ExperimentConfig(mode="nonlinear")
        assert cfg.fit_window == [10.0, pytest.approx(validity_tmax(10.0, 200 * math.pi, 0.5))]
        assert cfg.fit_window[1] == pytest.approx(99.0)

    def test_refuses_window_past_validity(self):
        with pytest.raises(ValueError):
            ExperimentConfig(mode="linear_torus", n=64, box_len=20 * math.pi, t_end=500, fit_window=[10, 500])

    def test_window_inside_run(self):
        with pytest.raises(ValueError):
            ExperimentConfig(mode="linear_r2", t_end=100, fit_window=[10, 1000])

    def test_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"mode": "linear_r2", "beta": 0.75, "s1_list": [0, 1]}))
        cfg = ExperimentConfig.from_json(str(p), seed=5)
        assert cfg.beta == 0.75 and cfg.seed == 5 and cfg.s1_list == [0.0, 1.0]

    def test_seed_drawn_when_missing(self):
        cfg = ExperimentConfig(mode="linear_r2", seed=None)
        assert 0 <= cfg.seed < 2**64


class TestRun:
    def test_linear_r2_three_quarters(self, tmp_path):
        cfg = ExperimentConfig(mode="linear_r2", beta=0.75, s1_list=[1.0], amplitude=1.0, sigma=1.0, out=str(tmp_path))
        rep = run_experiment(cfg)
        (fit,) = rep["fits"]
        assert fit["exponent"] == pytest.approx(-8 / 3, abs=0.07)
        assert rep["lower_bound"]["checks"][0]["verdict"]
        assert compare_rates(str(tmp_path / "report.json")) == 0

    def test_zero_amplitude(self, tmp_path):
        cfg = ExperimentConfig(mode="linear_r2", amplitude=0.0, out=str(tmp_path))
        rep = run_experiment(cfg)
        traj = NormTrajectory.from_csv(str(tmp_path / "trajectory.csv"))
        assert np.all(traj.array("lam_0_sq") == 0)
        assert rep["degenerate"] and rep["fit_errors"][0]["error"] == "NonPositiveValue"
        with pytest.raises(MalformedReport):
            compare_rates(rep)

    def test_linear_torus(self, tmp_path):
        cfg = ExperimentConfig(
            mode="linear_torus", n=128, box_len=50 * math.pi, sigma=2.0, C2=10.0, dt=0.5, record_every=2,
            fit_window=[4.0, 20.0], t_end=20.0, out=str(tmp_path),
        )
        rep = run_experiment(cfg)
        assert rep["fits"][0]["exponent"] == pytest.approx(-1.0, abs=0.15)
        assert rep["config"]["seed"] == rep["seed"] == 0

    def test_nonlinear_splitting(self, tmp_path):
        cfg = ExperimentConfig(
            mode="nonlinear", n=64, box_len=20 * math.pi, sigma=2.0, amplitude=1e-2, C2=10.0, dt=0.25,
            fit_window=[2.0, 9.0], t_end=9.0, out=str(tmp_path),
        )
        rep = run_experiment(cfg)
        traj = NormTrajectory.from_csv(rep["trajectory"])
        total = traj.array("lam_0")
        assert np.all(traj.array("L2_N") < total)
        assert rep["lower_bound"]["informational"]
        state, t = load_state(str(tmp_path / "final_state.npz"))
        assert t == 9.0 and state.grid.n == 64


class TestCompare:
    def _rep(self, verdicts):
        return {"fits": [{"series": f"s{i}", "exponent": -1.0, "theory_exponent": -1.0, "r_squared": 1.0, "verdict": v}
                         for i, v in enumerate(verdicts)]}

    def test_all_pass(self, capsys):
        assert compare_rates(self._rep([True, True])) == 0
        assert capsys.readouterr().out.count("PASS") == 2

    def test_one_fails(self, capsys):
        assert compare_rates(self._rep([True, False])) != 0
        assert "s1" in capsys.readouterr().out.splitlines()[-1]

    def test_empty(self):
        with pytest.raises(MalformedReport):
            compare_rates({"fits": []})
        with pytest.raises(MalformedReport):
            compare_rates({})


def test_state_roundtrip(tmp_path, rng):
    g = Grid(16, 3.0)
    s = make_initial("random_band", 0.2, 0.0, g, seed=1)
    save_state(str(tmp_path / "s.npz"), s, time=1.25)
    back, t = load_state(str(tmp_path / "s.npz"))
    assert t == 1.25
    for f, h in zip(s.fields, back.fields):
        assert np.allclose(f.coeffs, h.coeffs, atol=1e-16)
