"""Energy/dissipation functionals, Fourier-splitting ball energy and the
trajectory container that collects them over time."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import NonMonotoneTime
from .littlewood_paley import besov_blocks, build_partition
from .spectral import PhysParams, SpectralField, State

__all__ = [
    "FunctionalConfig",
    "NormTrajectory",
    "hs_norm_sq",
    "cross_term",
    "energy_E0",
    "dissipation_D0",
    "ball_energy",
    "weighted_Es",
    "weighted_Ds",
    "lambda_norm",
    "besov_minus1",
    "record",
    "Recorder",
    "series_name",
    "BASE_COLUMNS",
]

BASE_COLUMNS = ("L2_a", "L2_u", "Hs", "E0", "D0", "ball_energy", "besov_minus1")


@dataclass(frozen=True)
class FunctionalConfig:
    s: float = 1.5
    k: float = 0.01
    C2: float = 100.0

    def __post_init__(self):
        if not self.s > 1:
            raise ValueError("s must exceed 1")
        if not self.k > 0:
            raise ValueError("k must be positive")
        if not self.C2 > 0:
            raise ValueError("C2 must be positive")

    @staticmethod
    def b(beta: float) -> float:
        """Time-weight exponent ``2 - 1/beta``."""
        return 2.0 - 1.0 / beta


def _sum(f_sq_weighted: np.ndarray, grid) -> float:
    return grid.box_len**2 * grid.spectral_sum(f_sq_weighted)


def hs_norm_sq(f: SpectralField, sigma: float) -> float:
    """``||f||^2_{H^sigma}`` with multiplier ``(1 + |xi|^2)^sigma``."""
    g = f.grid
    return _sum((1 + g.xi_abs**2) ** sigma * np.abs(f.coeffs) ** 2, g)


def _hom_weight(grid, power: float) -> np.ndarray:
    """``|xi|^power`` with the mean mode set to 0."""
    r = grid.xi_abs
    with np.errstate(divide="ignore"):
        w = np.where(r > 0, r, 1.0) ** power
    w[0, 0] = 0.0
    return w


def _grad_pairing(state: State, weight: np.ndarray) -> float:
    """``Re sum L^2 weight (i xi a_hat) . conj(u_hat)`` over the lattice."""
    g = state.grid
    a = state.a.coeffs
    u1, u2 = (f.coeffs for f in state.u)
    inner = 1j * a * (g.dxi1 * np.conj(u1) + g.dxi2 * np.conj(u2))
    return _sum(weight * inner.real, g)


def cross_term(state: State, cfg: FunctionalConfig, beta: float) -> float:
    """``2k <Lambda^{beta-1} grad a, Lambda^{beta-1} u>_{H^{s-2beta+1}}``."""
    g = state.grid
    w = (1 + g.xi_abs**2) ** (cfg.s - 2 * beta + 1) * _hom_weight(g, 2 * (beta - 1))
    return 2 * cfg.k * _grad_pairing(state, w)


def energy_E0(state: State, cfg: FunctionalConfig, params: PhysParams) -> float:
    a, (u1, u2) = state.a, state.u
    base = params.gamma * hs_norm_sq(a, cfg.s) + hs_norm_sq(u1, cfg.s) + hs_norm_sq(u2, cfg.s)
    return base + cross_term(state, cfg, params.beta)


def dissipation_D0(state: State, cfg: FunctionalConfig, params: PhysParams) -> float:
    g = state.grid
    beta, gamma, s = params.beta, params.gamma, cfg.s
    lam2 = _hom_weight(g, 2 * beta)
    w_a = lam2 * (1 + g.xi_abs**2) ** (s + 1 - 2 * beta)
    w_u = lam2 * (1 + g.xi_abs**2) ** s
    a2 = np.abs(state.a.coeffs) ** 2
    u2 = sum(np.abs(f.coeffs) ** 2 for f in state.u)
    return cfg.k * gamma * _sum(w_a * a2, g) + _sum(w_u * u2, g)


def ball_energy(state: State, t: float, cfg: FunctionalConfig, beta: float) -> float:
    """``||a||^2 + ||u||^2`` restricted to ``|xi|^{2beta} <= C2/(1+t)`` (mean included)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    g = state.grid
    inside = g.xi_abs ** (2 * beta) <= cfg.C2 / (1 + t)
    e = sum(np.abs(f.coeffs) ** 2 for f in state.fields)
    return _sum(np.where(inside, e, 0.0), g)


def weighted_Es(state: State, t: float, cfg: FunctionalConfig, params: PhysParams) -> float:
    """``(1+t)^b ||Lambda^s (sqrt(gamma) a, u)||^2 + k <Lambda^{s-beta} grad a, Lambda^{s-beta} u>``."""
    g = state.grid
    s, beta = cfg.s, params.beta
    lam = _hom_weight(g, 2 * s)
    top = params.gamma * np.abs(state.a.coeffs) ** 2 + sum(np.abs(f.coeffs) ** 2 for f in state.u)
    weight = (1 + t) ** cfg.b(beta)
    return weight * _sum(lam * top, g) + cfg.k * _grad_pairing(state, _hom_weight(g, 2 * (s - beta)))


def weighted_Ds(state: State, t: float, cfg: FunctionalConfig, params: PhysParams) -> float:
    """``(1+t)^b ||Lambda^{s+beta} u||^2 + (k gamma / 2) ||grad Lambda^{s-beta} a||^2``."""
    g = state.grid
    s, beta = cfg.s, params.beta
    u2 = sum(np.abs(f.coeffs) ** 2 for f in state.u)
    # |dxi|^2 rather than |xi|^2: the gradient drops the Nyquist line
    grad2 = g.dxi1**2 + g.dxi2**2
    a_part = _sum(grad2 * _hom_weight(g, 2 * (s - beta)) * np.abs(state.a.coeffs) ** 2, g)
    return (1 + t) ** cfg.b(beta) * _sum(_hom_weight(g, 2 * (s + beta)) * u2, g) + cfg.k * params.gamma / 2 * a_part


def lambda_norm(state: State, s1: float) -> float:
    """``(||Lambda^s1 a||^2 + ||Lambda^s1 u||^2)^{1/2}`` (mean kept when ``s1 == 0``)."""
    g = state.grid
    w = np.ones(g.shape) if s1 == 0 else _hom_weight(g, 2 * s1)
    e = sum(np.abs(f.coeffs) ** 2 for f in state.fields)
    return math.sqrt(_sum(w * e, g))


def besov_minus1(state: State) -> float:
    """``sup_j 2^{-j} ||Delta_j (a, u)||_{L^2}`` of the mean-free part."""
    part = build_partition(state.grid)
    blocks = np.sqrt(sum(besov_blocks(f, -1.0, part) ** 2 for f in state.fields))
    return float(blocks.max())


def series_name(s1: float) -> str:
    return f"lam_{float(s1):g}"


@dataclass
class NormTrajectory:
    """Append-only table of functionals sampled along a run."""

    columns: list[str]
    times: list[float] = field(default_factory=list)
    series: dict[str, list[float]] = field(default_factory=dict)
    status: str = "ok"
    final_state: Optional[State] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for c in self.columns:
            self.series.setdefault(c, [])

    def __len__(self):
        return len(self.times)

    def append(self, t: float, row: Mapping[str, float]):
        if self.times and not t > self.times[-1]:
            raise NonMonotoneTime(f"t={t} after t={self.times[-1]}")
        missing = set(self.columns) - set(row)
        if missing:
            raise KeyError(f"row lacks columns {sorted(missing)}")
        self.times.append(float(t))
        for c in self.columns:
            self.series[c].append(float(row[c]))

    def array(self, name: str) -> np.ndarray:
        if name == "t":
            return np.asarray(self.times)
        return np.asarray(self.series[name])

    def to_csv(self, path: Optional[str] = None) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *self.columns])
        for i, t in enumerate(self.times):
            w.writerow([format(t, ".17g")] + [format(self.series[c][i], ".17g") for c in self.columns])
        text = buf.getvalue()
        if path is not None:
            tmp = f"{path}.tmp{os.getpid()}"
            with open(tmp, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        return text

    @classmethod
    def from_csv(cls, source: str) -> "NormTrajectory":
        """Parse CSV text, or a path to a CSV file."""
        if "\n" not in source and os.path.exists(source):
            with open(source, newline="") as fh:
                source = fh.read()
        rows = list(csv.reader(io.StringIO(source)))
        header, body = rows[0], rows[1:]
        if header[0] != "t":
            raise ValueError("first CSV column must be t")
        traj = cls(list(header[1:]))
        for row in body:
            traj.append(float(row[0]), {c: float(v) for c, v in zip(header[1:], row[1:])})
        return traj


def compute_row(
    state: State,
    t: float,
    cfg: FunctionalConfig,
    params: PhysParams,
    s1_list: Sequence[float] = (0.0,),
) -> dict[str, float]:
    a, (u1, u2) = state.a, state.u
    row = {
        "L2_a": a.l2_norm(),
        "L2_u": math.hypot(u1.l2_norm(), u2.l2_norm()),
        "Hs": math.sqrt(sum(hs_norm_sq(f, cfg.s) for f in state.fields)),
        "E0": energy_E0(state, cfg, params),
        "D0": dissipation_D0(state, cfg, params),
        "ball_energy": ball_energy(state, t, cfg, params.beta),
        "besov_minus1": besov_minus1(state),
    }
    for s1 in s1_list:
        row[series_name(s1)] = lambda_norm(state, s1)
    return row


def record(
    traj: NormTrajectory,
    state: State,
    t: float,
    cfg: FunctionalConfig,
    params: PhysParams,
    s1_list: Sequence[float] = (0.0,),
    extra: Optional[Mapping[str, float]] = None,
) -> dict[str, float]:
    """Evaluate every configured series for ``state`` and append the row."""
    if traj.times and not t > traj.times[-1]:
        raise NonMonotoneTime(f"t={t} after t={traj.times[-1]}")
    row = compute_row(state, t, cfg, params, s1_list)
    if extra:
        row.update(extra)
    traj.append(t, row)
    return row


class Recorder:
    """Callable used by the solver: ``recorder(state, t)`` appends one row."""

    def __init__(
        self,
        cfg: FunctionalConfig,
        params: PhysParams,
        s1_list: Iterable[float] = (0.0,),
        extras: Optional[Mapping[str, callable]] = None,
    ):
        self.cfg = cfg
        self.params = params
        self.s1_list = tuple(float(s) for s in s1_list)
        self.extras = dict(extras or {})
        cols = list(BASE_COLUMNS) + [series_name(s) for s in self.s1_list] + list(self.extras)
        self.trajectory = NormTrajectory(cols)

    def __call__(self, state: State, t: float):
        extra = {name: fn(state, t) for name, fn in self.extras.items()}
        return record(self.trajectory, state, t, self.cfg, self.params, self.s1_list, extra)
