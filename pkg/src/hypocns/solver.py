"""Time integration of the perturbation system

    a_t + div u            = -div(a u)
    u_t + Lambda^{2beta} u + gamma grad a = K(a) grad a - (u.grad) u + a/(1+a) Lambda^{2beta} u

with the linear part propagated exactly per mode and the right-hand side
handled by a two-stage exponential Runge-Kutta rule (ETD2RK):

    y*      = E(h) y_n + h phi1(hM) N(y_n)
    y_{n+1} = y* + h phi2(hM) (N(y*) - N(y_n))
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .diagnostics import FunctionalConfig, NormTrajectory, Recorder
from .errors import CflViolation, DomainViolation
from .linear import BlockFunction, _lattice_symbol
from .spectral import (
    PhysParams,
    SpectralField,
    State,
    divergence,
    gradient,
    lambda_s,
    pointwise_map,
    pointwise_product,
)

__all__ = ["SolverConfig", "RhsPair", "k_of_a", "nonlinear_rhs", "step", "simulate", "VACUUM_FLOOR"]

log = logging.getLogger(__name__)

VACUUM_FLOOR = 0.1


@dataclass(frozen=True)
class SolverConfig:
    params: PhysParams
    dt: float
    t_end: float
    cfl_limit: float = 0.5
    dealias: bool = True
    record_every: int = 1
    nonlinear: bool = True  # False turns the scheme into the exact linear flow

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if not 0 < self.cfl_limit <= 1:
            raise ValueError("cfl_limit must lie in (0, 1]")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass(frozen=True, eq=False)
class RhsPair:
    F: SpectralField
    H: tuple[SpectralField, SpectralField]


def _k_phi(gamma: float):
    def phi(x):
        rho = 1.0 + x
        return gamma * x / rho + gamma * (1.0 - rho ** (gamma - 1.0)) / rho

    return phi


def _positive_density(x):
    return 1.0 + x > 0


def k_of_a(a: SpectralField, gamma: float) -> SpectralField:
    """``K(a) = gamma a/(1+a) + (P'(1) - P'(1+a))/(1+a)`` with ``P(rho) = rho^gamma``."""
    return pointwise_map(a, _k_phi(gamma), _positive_density)


def nonlinear_rhs(state: State, params: PhysParams, dealias: bool = True) -> RhsPair:
    a, (u1, u2) = state.a, state.u
    prod = lambda f, g: pointwise_product(f, g, dealias)  # noqa: E731

    F = -divergence((prod(a, u1), prod(a, u2)))

    da1, da2 = gradient(a)
    K = k_of_a(a, params.gamma)
    q = pointwise_map(a, lambda x: x / (1.0 + x), _positive_density)
    H = []
    for ui, dai in ((u1, da1), (u2, da2)):
        d1, d2 = gradient(ui)
        adv = prod(u1, d1) + prod(u2, d2)
        H.append(prod(K, dai) - adv + prod(q, lambda_s(ui, 2 * params.beta)))
    return RhsPair(F, (H[0], H[1]))


class _Stepper:
    """ETD2RK weights for one (grid, params, dt)."""

    def __init__(self, grid, params: PhysParams, dt: float):
        self.sym = _lattice_symbol(grid, params)
        self.dt = dt
        self.E = self.sym.exp(dt)
        self.phi1 = self.sym.phi(1, dt)
        self.phi2 = self.sym.phi(2, dt)

    def apply(self, fn: BlockFunction, coeffs):
        return self.sym.apply(fn, *coeffs)


_STEPPERS: dict = {}


def _stepper(grid, params, dt) -> _Stepper:
    key = (grid, params, float(dt))
    st = _STEPPERS.get(key)
    if st is None:
        if len(_STEPPERS) > 8:
            _STEPPERS.clear()
        st = _STEPPERS[key] = _Stepper(grid, params, dt)
    return st


def _rhs_coeffs(state: State, cfg: SolverConfig):
    if not cfg.nonlinear:
        z = np.zeros(state.grid.shape, dtype=complex)
        return (z, z, z)
    rhs = nonlinear_rhs(state, cfg.params, cfg.dealias)
    return (rhs.F.coeffs, rhs.H[0].coeffs, rhs.H[1].coeffs)


def _check_admissible(state: State):
    m = state.min_density()
    if not m > VACUUM_FLOOR:
        raise DomainViolation(f"min(1 + a) = {m:.4g} <= {VACUUM_FLOOR}")


def cfl_dt(state: State, cfl_limit: float) -> float:
    """Largest step allowed by the advective CFL condition."""
    umax = max(float(np.max(np.abs(f.physical))) for f in state.u)
    return cfl_limit * state.grid.dx / max(1e-12, umax)


def step(state: State, dt: float, cfg: SolverConfig) -> State:
    """Advance one ETD2RK step of size ``dt``."""
    if dt > cfl_dt(state, cfg.cfl_limit) * (1 + 1e-12):
        raise CflViolation(f"dt={dt} exceeds CFL limit {cfl_dt(state, cfg.cfl_limit):.4g}")
    _check_admissible(state)
    st = _stepper(state.grid, cfg.params, dt)
    y0 = tuple(f.coeffs for f in state.fields)
    n0 = _rhs_coeffs(state, cfg)
    ey = st.apply(st.E, y0)
    pn = st.apply(st.phi1, n0)
    ystar = tuple(e + dt * p for e, p in zip(ey, pn))
    if not cfg.nonlinear:
        return State.from_coeffs(state.grid, *ystar)
    mid = State.from_coeffs(state.grid, *ystar)
    n1 = _rhs_coeffs(mid, cfg)
    corr = st.apply(st.phi2, tuple(b - a for a, b in zip(n0, n1)))
    y1 = tuple(y + dt * c for y, c in zip(ystar, corr))
    return State.from_coeffs(state.grid, *y1)


def simulate(
    state0: State,
    cfg: SolverConfig,
    recorder: Optional[Callable[[State, float], object]] = None,
    functionals: Optional[FunctionalConfig] = None,
) -> NormTrajectory:
    """Integrate to ``cfg.t_end`` recording every ``cfg.record_every`` steps.

    ``recorder`` defaults to a :class:`~hypocns.diagnostics.Recorder`; any
    callable exposing a ``trajectory`` attribute is accepted.  A state that
    leaves the admissible set stops the run and marks the trajectory status.
    """
    if recorder is None:
        recorder = Recorder(functionals or FunctionalConfig(), cfg.params)
    traj: NormTrajectory = getattr(recorder, "trajectory", None)
    if traj is None:
        raise TypeError("recorder must expose a .trajectory NormTrajectory")

    n_steps = max(0, math.ceil(cfg.t_end / cfg.dt - 1e-9))
    state, t = state0, 0.0
    recorder(state, t)
    for i in range(1, n_steps + 1):
        h = cfg.dt if i < n_steps else cfg.t_end - (n_steps - 1) * cfg.dt
        try:
            state = step(state, h, cfg)
        except DomainViolation as exc:
            log.warning("run stopped at t=%.6g: %s", t, exc)
            traj.status = f"domain_violation at t={t:.17g}"
            traj.final_state = state
            return traj
        t = cfg.t_end if i == n_steps else i * cfg.dt
        if i % cfg.record_every == 0 or i == n_steps:
            recorder(state, t)
    traj.final_state = state
    return traj
