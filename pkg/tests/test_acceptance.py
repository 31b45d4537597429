"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` (the lines are also
repeated in the terminal summary of any pytest run that includes this file).
"""

import math
import sys

import numpy as np
import pytest
import scipy.linalg as sla

from hypocns import Grid, PhysParams, SpectralField, State
from hypocns.diagnostics import NormTrajectory
from hypocns.harness import ExperimentConfig, make_initial, run_experiment
from hypocns.linear import ModeSymbol, lower_bound_constant, mode_propagator
from hypocns.littlewood_paley import build_partition, lp_block, phi
from hypocns.solver import SolverConfig, nonlinear_rhs, step
from hypocns.spectral import divergence, gradient, hermitian_defect, lambda_s, pointwise_map, pointwise_product

RESULTS = []


def verdict(num, ok, detail):
    line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    assert ok, line


LINEAR_CASES = [(0.5, 0.0), (0.5, 1.0), (0.75, 0.0), (0.75, 1.0)]


@pytest.fixture(scope="module")
def linear_reports(tmp_path_factory):
    reps = {}
    for beta, s1 in LINEAR_CASES:
        out = tmp_path_factory.mktemp(f"r2_{beta}_{s1}")
        cfg = ExperimentConfig(mode="linear_r2", beta=beta, gamma=1.0, s1_list=[s1], amplitude=1.0, sigma=1.0,
                               n_samples=41, out=str(out))
        reps[beta, s1] = run_experiment(cfg)
    return reps


def desk_config(out):
    # mean-free bump on a 512^2 box of side 200 pi; fit over [10, t_max] with t_max = 99
    return ExperimentConfig(mode="nonlinear", n=512, box_len=200 * math.pi, beta=0.5, gamma=1.0,
                            init="mean_zero_bump", amplitude=1e-2, sigma=2.0, seed=0, s1_list=[0.0],
                            C2=10.0, dt=0.25, record_every=4, out=str(out))


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    cfg = desk_config(out)
    rep = run_experiment(cfg)
    return cfg, rep, NormTrajectory.from_csv(rep["trajectory"])


def test_criterion_01_linear_sharp_rate(linear_reports):
    lines, ok = [], True
    for (beta, s1), rep in linear_reports.items():
        fit = rep["fits"][0]
        theory = -(1 + s1) / beta
        good = abs(fit["exponent"] - theory) <= 0.05 and fit["r_squared"] >= 0.999 and fit["window"] == [1e2, 1e4]
        ok &= good
        lines.append(f"(b={beta}, s1={s1}) {fit['exponent']:.4f}/{theory:.4f} r2={fit['r_squared']:.6f}")
    verdict(1, ok, "; ".join(lines))


def test_criterion_02_linear_lower_bound(linear_reports):
    lines, ok = [], True
    for (beta, s1), rep in linear_reports.items():
        (chk,) = rep["lower_bound"]["checks"]
        ok &= chk["c0"] > 0 and chk["verdict"] and chk["min_ratio"] >= 1.0
        lines.append(f"(b={beta}, s1={s1}) min value/bound = {chk['min_ratio']:.3g}")
    verdict(2, ok, "; ".join(lines))


def test_criterion_03_lower_bound_constant_oracle():
    c = lower_bound_constant(1.0, 1.0, 0.0, 0.5)
    want = math.pi / 2 * (0.25 - 0.75 * math.exp(-2))
    rel = abs(c * c - want) / want
    verdict(3, rel <= 1e-8, f"C^2 = {c * c:.12f}, closed form {want:.12f}, rel err {rel:.2e}")


def test_criterion_04_nonlinear_decay(desk_run):
    cfg, rep, traj = desk_run
    (fit,) = rep["fits"]
    t1 = fit["window"][1]
    ok = (
        rep["status"] == "ok"
        and abs(fit["exponent"] + 1.0) <= 0.15
        and t1 <= rep["validity_window"][1] + 1e-9
        and fit["n_samples"] >= 8
    )
    verdict(4, ok, f"slope {fit['exponent']:.4f} vs -1 over [{fit['window'][0]:g}, {t1:g}] "
                   f"({fit['n_samples']} samples, r2={fit['r_squared']:.5f})")


def test_criterion_05_lyapunov(desk_run):
    _, _, traj = desk_run
    t, E, D = traj.array("t"), traj.array("E0"), traj.array("D0")
    rise = float(np.max(np.diff(E)))
    dissipated = float(np.sum(D[:-1] * np.diff(t)))
    ok = rise <= 1e-10 * E[0] and dissipated <= 1.05 * E[0]
    verdict(5, ok, f"max E0 increment / E0(0) = {rise / E[0]:.3e}; sum D0 dt / E0(0) = {dissipated / E[0]:.4f}")


def test_criterion_06_exact_solution():
    g = Grid(64, 2 * math.pi)
    worst = 0.0
    for beta in (0.5, 0.75):
        p = PhysParams(beta, 1.0)
        s0 = make_initial("incompressible_mode", 0.2, 0.0, g, mode=(1, 2))
        dt = 0.01
        cfg = SolverConfig(p, dt, 100 * dt)
        s = s0
        for _ in range(100):
            s = step(s, dt, cfg)
        decay = math.exp(-(math.sqrt(5.0) ** (2 * beta)) * 100 * dt)
        for f, f0 in zip(s.u, s0.u):
            want = decay * f0.physical
            worst = max(worst, float(np.max(np.abs(f.physical - want)) / np.max(np.abs(want))))
        worst = max(worst, float(np.max(np.abs(s.a.physical))))
    verdict(6, worst <= 1e-8, f"max relative error after 100 steps {worst:.2e}")


def test_criterion_07_partition_of_unity():
    rng = np.random.default_rng(7)
    k = rng.integers(-256, 257, size=(1200, 2))
    k = k[np.any(k != 0, axis=1)][:1000]
    r = np.hypot(k[:, 0], k[:, 1]) * (2 * math.pi / (200 * math.pi))
    js = np.arange(math.floor(math.log2(r.min())) - 2, math.ceil(math.log2(r.max())) + 3)
    vals = np.array([phi(r * 2.0**-j) for j in js])
    sum_err = float(np.max(np.abs(vals.sum(axis=0) - 1)))
    sq = (vals**2).sum(axis=0)
    sq_ok = bool(np.all(sq >= 0.5) and np.all(sq <= 1.0))
    disjoint = all(np.all(vals[i] * vals[j] == 0) for i in range(len(js)) for j in range(i + 2, len(js)))
    ok = sum_err <= 1e-10 and sq_ok and disjoint
    verdict(7, ok, f"sum error {sum_err:.1e}; square sum in [{sq.min():.4f}, {sq.max():.4f}]; disjoint={disjoint}")


def test_criterion_08_propagator_oracle():
    rng = np.random.default_rng(8)
    worst_exp = worst_semi = 0.0
    for _ in range(1000):
        r = 10 ** rng.uniform(-3, 2)
        th = rng.uniform(0, 2 * np.pi)
        xi = (r * math.cos(th), r * math.sin(th))
        t, s = rng.uniform(0, 10, size=2)
        p = PhysParams(rng.uniform(0.5, 0.999), rng.uniform(1, 5))
        P = mode_propagator(xi, t, p)
        worst_exp = max(worst_exp, float(np.max(np.abs(P - sla.expm(-t * ModeSymbol(xi, p).matrix)))))
        semi = mode_propagator(xi, s, p) @ P - mode_propagator(xi, s + t, p)
        worst_semi = max(worst_semi, float(np.max(np.abs(semi))))
    ok = worst_exp <= 1e-10 and worst_semi <= 1e-11
    verdict(8, ok, f"max |closed form - expm| {worst_exp:.2e}; max semigroup defect {worst_semi:.2e}")


def _symmetry_scan():
    rng = np.random.default_rng(9)
    g = Grid(64, 10.0)
    f, h = (SpectralField.from_physical(g, 0.1 * rng.standard_normal((64, 64))) for _ in range(2))
    part = build_partition(g)
    s = State(f, (h, f))
    rhs = nonlinear_rhs(s, PhysParams(0.6, 1.4))
    outs = [
        lambda_s(f, 1.3), *gradient(f), divergence((f, h)), pointwise_product(f, h),
        pointwise_product(f, h, dealias=False), pointwise_map(f, np.tanh), lp_block(f, part.j_min + 3, part),
        rhs.F, *rhs.H, *step(s, 0.01, SolverConfig(PhysParams(0.6, 1.4), 0.01, 0.01)).fields,
    ]
    return max(hermitian_defect(o) / max(1.0, o.coeff_norm()) for o in outs)


def test_criterion_09_conservation_and_symmetry(desk_run):
    cfg, rep, traj = desk_run
    g = Grid(cfg.n, cfg.box_len)
    a0 = make_initial(cfg.init, cfg.amplitude, cfg.sigma, g, cfg.seed).a
    scale = float(np.mean(np.abs(a0.physical)))
    drift = abs(rep["mass"]["final"] - rep["mass"]["initial"]) / scale
    sym = _symmetry_scan()
    ok = drift <= 1e-12 and sym <= 1e-15
    verdict(9, ok, f"relative mass drift {drift:.1e}; max Hermitian defect over operations {sym:.1e}")


def test_criterion_10_determinism(desk_run, tmp_path):
    cfg, rep, _ = desk_run
    again = run_experiment(desk_config(tmp_path))
    with open(rep["trajectory"], "rb") as fh:
        first = fh.read()
    with open(again["trajectory"], "rb") as fh:
        second = fh.read()
    verdict(10, first == second, f"CSV bytes identical: {first == second} ({len(first)} bytes)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-s", "-q"]))
