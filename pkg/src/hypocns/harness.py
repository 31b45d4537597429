"""Experiment orchestration: initial data, configs, power-law fits and reports."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .diagnostics import FunctionalConfig, NormTrajectory, Recorder, series_name
from .errors import (
    HypoCNSError,
    InsufficientSamples,
    MalformedReport,
    NonPositiveValue,
    SigmaTooLarge,
)
from .linear import (
    RadialProfile,
    evolve_linear,
    find_eta,
    lower_bound_constant,
    r2_norm_trajectory,
)
from .solver import SolverConfig, simulate
from .spectral import Grid, PhysParams, SpectralField, State

__all__ = [
    "MODES",
    "INIT_KINDS",
    "ExperimentConfig",
    "FitResult",
    "make_initial",
    "fit_power_law",
    "validity_tmax",
    "run_experiment",
    "compare_rates",
    "save_state",
    "load_state",
]

log = logging.getLogger(__name__)

MODES = ("linear_r2", "linear_torus", "nonlinear")
INIT_KINDS = ("gaussian_bump", "mean_zero_bump", "incompressible_mode", "random_band")

_DEFAULT_TOL = {"linear_r2": 0.05, "linear_torus": 0.15, "nonlinear": 0.15}
_MIN_FIT_SAMPLES = 8
_MIN_R2 = 0.99

WEIGHTED_ES_NOTE = (
    "weighted_Es uses cross-term coefficient k; an alternative form with "
    "coefficient 2k exists and is not used here"
)


@dataclass
class ExperimentConfig:
    """One decay experiment.  ``None`` entries are filled from mode defaults."""

    mode: str = "nonlinear"
    n: int = 512
    box_len: float = 200 * math.pi
    beta: float = 0.5
    gamma: float = 1.0
    init: str = "mean_zero_bump"
    amplitude: float = 1e-2
    sigma: float = 2.0
    seed: Optional[int] = 0
    s1_list: list = field(default_factory=lambda: [0.0])
    fit_window: Optional[list] = None
    s: float = 1.5
    k: float = 0.01
    C2: float = 10.0
    out: str = "out"
    dt: float = 0.25
    t_end: Optional[float] = None
    tolerance: Optional[float] = None
    record_every: Optional[int] = None
    n_samples: int = 41

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.init not in INIT_KINDS:
            raise ValueError(f"init must be one of {INIT_KINDS}, got {self.init!r}")
        self.s1_list = [float(s) for s in self.s1_list]
        if not self.s1_list or min(self.s1_list) < 0:
            raise ValueError("s1_list must be a nonempty list of nonnegative orders")
        if self.seed is None:
            self.seed = int(np.random.SeedSequence().entropy % 2**64)
        self.seed = int(self.seed)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.tolerance is None:
            self.tolerance = _DEFAULT_TOL[self.mode]
        PhysParams(self.beta, self.gamma)
        FunctionalConfig(self.s, self.k, self.C2)
        if self.mode != "linear_r2":
            Grid(self.n, self.box_len)
        t_hi = self.validity_tmax if self.mode != "linear_r2" else 1e4
        if self.t_end is None:
            self.t_end = t_hi
        if self.fit_window is None:
            self.fit_window = [1e2, 1e4] if self.mode == "linear_r2" else [10.0, min(t_hi, self.t_end)]
        t0, t1 = (float(x) for x in self.fit_window)
        self.fit_window = [t0, t1]
        if not 0 <= t0 < t1:
            raise ValueError("fit_window must satisfy 0 <= t0 < t1")
        if t1 > self.t_end * (1 + 1e-12):
            raise ValueError(f"fit window ends at {t1} beyond the simulated range {self.t_end}")
        if self.mode != "linear_r2" and t1 > self.validity_tmax * (1 + 1e-12):
            raise ValueError(
                f"fit window ends at {t1}, after the box stops resolving the low-frequency ball "
                f"(t_max = {self.validity_tmax:.6g})"
            )
        if self.record_every is None:
            self.record_every = max(1, int(round(1.0 / self.dt)))

    @property
    def validity_tmax(self) -> float:
        return validity_tmax(self.C2, self.box_len, self.beta)

    @property
    def params(self) -> PhysParams:
        return PhysParams(self.beta, self.gamma)

    @property
    def functionals(self) -> FunctionalConfig:
        return FunctionalConfig(self.s, self.k, self.C2)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**dict(data))

    @classmethod
    def from_json(cls, path: str, **overrides) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config file must hold a flat JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def validity_tmax(C2: float, box_len: float, beta: float, shells: int = 10) -> float:
    """Last time at which ``(C2/(1+t))^{1/(2 beta)} >= shells * 2 pi / L``."""
    return C2 * (shells * 2 * math.pi / box_len) ** (-2 * beta) - 1.0


# ---------------------------------------------------------------- initial data


def _bump(grid: Grid, amplitude: float, sigma: float) -> np.ndarray:
    X, Y = grid.coords
    c = grid.box_len / 2
    return amplitude * np.exp(-((X - c) ** 2 + (Y - c) ** 2) / (2 * sigma**2))


def make_initial(
    kind: str,
    amplitude: float,
    sigma: float,
    grid: Grid,
    seed: Optional[int] = 0,
    mode: tuple[int, int] = (1, 2),
) -> State:
    """Initial perturbation ``(a0, u0)``.

    gaussian_bump
        every component equals ``amplitude * exp(-|x - x_c|^2 / (2 sigma^2))``
        centred in the box.
    mean_zero_bump
        the same with the k = 0 coefficient of every component removed.
    incompressible_mode
        ``a0 = 0`` and ``u0 = amplitude * e_perp cos(xi . x)`` with ``xi`` the
        lattice vector ``mode``; an exact solution of the full system.
    random_band
        seeded Gaussian noise filtered to lattice shells ``1 <= |k| <= 4`` and
        scaled to sup-norm ``amplitude``.
    """
    if kind not in INIT_KINDS:
        raise ValueError(f"unknown init kind {kind!r}")
    if kind in ("gaussian_bump", "mean_zero_bump"):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        if sigma > grid.box_len / 16:
            raise SigmaTooLarge(f"sigma={sigma} exceeds L/16={grid.box_len / 16:.4g}")
        f = SpectralField.from_physical(grid, _bump(grid, amplitude, sigma))
        if kind == "mean_zero_bump":
            f = f.without_mean()
        return State(f, (f, f))
    if kind == "incompressible_mode":
        m1, m2 = mode
        kx = 2 * math.pi / grid.box_len
        xi = np.array([m1 * kx, m2 * kx])
        if not np.any(xi):
            raise ValueError("mode must be a nonzero lattice vector")
        e = np.array([-xi[1], xi[0]]) / np.hypot(*xi)
        X, Y = grid.coords
        wave = amplitude * np.cos(xi[0] * X + xi[1] * Y)
        u1 = SpectralField.from_physical(grid, e[0] * wave)
        u2 = SpectralField.from_physical(grid, e[1] * wave)
        return State(SpectralField.zeros(grid), (u1, u2))
    # random_band
    rng = np.random.default_rng(seed)
    k_abs = grid.xi_abs * grid.box_len / (2 * math.pi)
    band = (k_abs >= 1) & (k_abs <= 4)
    fields = []
    for _ in range(3):
        c = grid.to_spectral(rng.standard_normal((grid.n, grid.n))) * band
        x = grid.to_physical(c)
        peak = np.max(np.abs(x))
        fields.append(SpectralField(grid, c * (amplitude / peak if peak > 0 else 0.0)))
    return State(fields[0], (fields[1], fields[2]))


# ---------------------------------------------------------------- fitting


@dataclass
class FitResult:
    series: str
    exponent: float
    intercept: float
    r_squared: float
    window: list
    n_samples: int
    theory_exponent: Optional[float] = None
    tolerance: Optional[float] = None
    verdict: Optional[bool] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def fit_power_law(
    traj: NormTrajectory,
    series: str,
    window: Sequence[float],
    theory_exponent: Optional[float] = None,
    tolerance: float = 0.15,
) -> FitResult:
    """Least-squares slope of ``log(value)`` against ``log(1+t)`` on ``window``.

    The verdict passes when the slope is within ``tolerance`` of
    ``theory_exponent`` and ``r_squared >= 0.99``.
    """
    t0, t1 = float(window[0]), float(window[1])
    t = traj.array("t")
    y = traj.array(series)
    sel = (t >= t0 * (1 - 1e-12)) & (t <= t1 * (1 + 1e-12))
    if sel.sum() < _MIN_FIT_SAMPLES:
        raise InsufficientSamples(f"{series}: {int(sel.sum())} samples in [{t0}, {t1}], need {_MIN_FIT_SAMPLES}")
    y = y[sel]
    if not np.all(y > 0):
        raise NonPositiveValue(f"{series} has nonpositive values in [{t0}, {t1}]")
    x = np.log1p(t[sel])
    ly = np.log(y)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * x + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    r2 = min(1.0, max(0.0, r2))
    verdict = None
    if theory_exponent is not None:
        verdict = bool(abs(slope - theory_exponent) <= tolerance and r2 >= _MIN_R2)
    return FitResult(
        series=series,
        exponent=float(slope),
        intercept=float(icpt),
        r_squared=r2,
        window=[t0, t1],
        n_samples=int(sel.sum()),
        theory_exponent=theory_exponent,
        tolerance=tolerance if theory_exponent is not None else None,
        verdict=verdict,
    )


# ---------------------------------------------------------------- running


def _atomic_write(path: str, text: str):
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _r2_profile(cfg: ExperimentConfig) -> RadialProfile:
    # Fourier transform of the gaussian_bump component
    c = cfg.amplitude * 2 * math.pi * cfg.sigma**2
    return RadialProfile.gaussian(a=c, u_par=c, u_perp=c, width=cfg.sigma)


def _run_linear_r2(cfg: ExperimentConfig, report: dict) -> NormTrajectory:
    params = cfg.params
    profile = _r2_profile(cfg)
    times = np.concatenate([[0.0], np.geomspace(1.0, cfg.t_end, cfg.n_samples)])
    cols = [series_name(s1) + "_sq" for s1 in cfg.s1_list]
    traj = NormTrajectory(cols)
    values = {c: r2_norm_trajectory(profile, s1, times, params) for c, s1 in zip(cols, cfg.s1_list)}
    for i, t in enumerate(times):
        traj.append(t, {c: values[c][i] for c in cols})

    c0 = float(profile.weighted_magnitude(0.0, params.gamma)[0])
    checks = []
    if c0 > 0:
        eta = find_eta(profile, params.gamma, c0)
        t0, t1 = cfg.fit_window
        sel = (times >= t0) & (times <= t1)
        for c, s1 in zip(cols, cfg.s1_list):
            cb = lower_bound_constant(c0, eta, s1, params.beta)
            rate = (1 + s1) / params.beta
            bound = (cb / 2) ** 2 * (1 + times[sel]) ** (-rate)
            v = np.asarray(values[c])[sel]
            checks.append(
                {
                    "series": c,
                    "C_beta": cb,
                    "eta": eta,
                    "c0": c0,
                    "min_ratio": float(np.min(v / bound)),
                    "verdict": bool(np.all(v >= bound)),
                }
            )
    report["lower_bound"] = {"informational": False, "checks": checks}
    return traj


def _torus_initial(cfg: ExperimentConfig, grid: Grid) -> State:
    return make_initial(cfg.init, cfg.amplitude, cfg.sigma, grid, cfg.seed)


def _run_linear_torus(cfg: ExperimentConfig, report: dict) -> NormTrajectory:
    grid = Grid(cfg.n, cfg.box_len)
    state0 = _torus_initial(cfg, grid)
    rec = Recorder(cfg.functionals, cfg.params, cfg.s1_list)
    step = cfg.dt * cfg.record_every
    n_rec = max(1, math.ceil(cfg.t_end / step - 1e-9))
    for i in range(n_rec + 1):
        t = min(i * step, cfg.t_end)
        rec(evolve_linear(state0, t, cfg.params), t)
    return rec.trajectory


def _run_nonlinear(cfg: ExperimentConfig, report: dict) -> NormTrajectory:
    grid = Grid(cfg.n, cfg.box_len)
    state0 = _torus_initial(cfg, grid)
    params = cfg.params

    def l2_nonlinear_part(state, t):
        lin = evolve_linear(state0, t, params)
        return math.sqrt(sum((f - g).l2_norm() ** 2 for f, g in zip(state.fields, lin.fields)))

    rec = Recorder(cfg.functionals, params, cfg.s1_list, {"L2_N": l2_nonlinear_part})
    scfg = SolverConfig(params, cfg.dt, cfg.t_end, record_every=cfg.record_every)
    traj = simulate(state0, scfg, rec)
    report["mass"] = {
        "initial": float(state0.a.mean.real),
        "final": float(traj.final_state.a.mean.real) if traj.final_state is not None else None,
    }
    report["lower_bound"] = {"informational": True, "checks": []}
    if traj.final_state is not None:
        save_state(os.path.join(cfg.out, "final_state.npz"), traj.final_state, time=traj.times[-1])
    return traj


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run ``cfg``; write ``trajectory.csv`` and ``report.json`` under ``cfg.out``.

    Returns the report dictionary.  Series that cannot be fitted (too few
    samples, nonpositive values) are listed under ``fit_errors`` and mark the
    report degenerate; a run stopped early is marked partial.
    """
    os.makedirs(cfg.out, exist_ok=True)
    report: dict = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "validity_window": [0.0, cfg.t_end if cfg.mode == "linear_r2" else cfg.validity_tmax],
        "notes": [WEIGHTED_ES_NOTE],
    }
    runner = {"linear_r2": _run_linear_r2, "linear_torus": _run_linear_torus, "nonlinear": _run_nonlinear}
    traj = runner[cfg.mode](cfg, report)
    report["status"] = traj.status
    report["partial"] = traj.status != "ok"
    csv_path = os.path.join(cfg.out, "trajectory.csv")
    traj.to_csv(csv_path)
    report["trajectory"] = csv_path

    fits, errors = [], []
    beta = cfg.beta
    window = list(cfg.fit_window)
    if report["partial"] and traj.times:
        window[1] = min(window[1], traj.times[-1])
    for s1 in cfg.s1_list:
        if cfg.mode == "linear_r2":
            name, theory = series_name(s1) + "_sq", -(1 + s1) / beta
        else:
            name, theory = series_name(s1), -(s1 + 1) / (2 * beta)
        try:
            fits.append(fit_power_law(traj, name, window, theory, cfg.tolerance).to_dict())
        except (InsufficientSamples, NonPositiveValue) as exc:
            errors.append({"series": name, "error": type(exc).__name__, "message": str(exc)})
    report["fits"] = fits
    report["fit_errors"] = errors
    report["degenerate"] = bool(errors)
    _atomic_write(os.path.join(cfg.out, "report.json"), json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def compare_rates(report, stream=None) -> int:
    """Print one line per fitted series; 0 iff every verdict passes.

    ``report`` is a report dictionary or a path to a report JSON file.
    """
    if isinstance(report, (str, os.PathLike)):
        try:
            with open(report) as fh:
                report = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedReport(f"cannot read report: {exc}") from exc
    if not isinstance(report, dict) or not isinstance(report.get("fits"), list):
        raise MalformedReport("report has no 'fits' list")
    fits = report["fits"]
    if not fits:
        raise MalformedReport("report has no fitted series")
    failed = []
    for fr in fits:
        try:
            name, slope, theory, r2, ok = (fr[k] for k in ("series", "exponent", "theory_exponent", "r_squared", "verdict"))
        except (KeyError, TypeError) as exc:
            raise MalformedReport(f"incomplete fit entry: {fr!r}") from exc
        line = f"{'PASS' if ok else 'FAIL'} {name}: slope {slope:.4f} vs {theory:.4f} (r^2 = {r2:.5f})"
        print(line, file=stream)
        if not ok:
            failed.append(name)
    for lb in report.get("lower_bound", {}).get("checks", []):
        print(f"{'PASS' if lb['verdict'] else 'FAIL'} lower bound {lb['series']}: min ratio {lb['min_ratio']:.4g}", file=stream)
        if not lb["verdict"] and not report["lower_bound"].get("informational", False):
            failed.append(f"lower_bound:{lb['series']}")
    if failed:
        print("failing: " + ", ".join(failed), file=stream)
        return 1
    return 0


# ---------------------------------------------------------------- state files


def save_state(path: str, state: State, time: float = 0.0):
    g = state.grid
    tmp = f"{path}.tmp{os.getpid()}.npz"
    np.savez(
        tmp,
        n=g.n,
        box_len=g.box_len,
        time=time,
        a=state.a.physical,
        u1=state.u[0].physical,
        u2=state.u[1].physical,
    )
    os.replace(tmp, path)


def load_state(path: str) -> tuple[State, float]:
    with np.load(path) as z:
        try:
            grid = Grid(int(z["n"]), float(z["box_len"]))
            fields = [SpectralField.from_physical(grid, z[k]) for k in ("a", "u1", "u2")]
            t = float(z["time"])
        except KeyError as exc:
            raise HypoCNSError(f"state file lacks {exc}") from exc
    return State(fields[0], (fields[1], fields[2])), t
