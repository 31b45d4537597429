"""Exact solution of the linearised system, mode by mode.

In Fourier variables the linear part reads

    d/dt a_hat    = -i xi . u_hat
    d/dt u_hat    = -|xi|^{2 beta} u_hat - i gamma xi a_hat

Splitting ``u_hat`` along ``e = xi/|xi|`` and its perpendicular decouples a
scalar heat factor ``exp(-|xi|^{2 beta} t)`` for the perpendicular part from
the 2x2 acoustic block

    M = [[0, -i r], [-i gamma r, -d]],   r = |xi|,  d = |xi|^{2 beta},

whose characteristic polynomial is ``lam^2 + d lam + gamma r^2``.  Every
analytic function of ``M`` is ``alpha I + beta M`` (Cayley-Hamilton), which is
how the propagator and the exponential-integrator weights are stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NegativeTime, QuadratureNotConverged
from .spectral import Grid, PhysParams, SpectralField, State

__all__ = [
    "ModeSymbol",
    "compressible_eigen",
    "exp_coefficients",
    "mode_propagator",
    "propagator_matrices",
    "BlockFunction",
    "LatticeSymbol",
    "evolve_linear",
    "RadialProfile",
    "r2_norm_trajectory",
    "lower_bound_constant",
    "find_eta",
]

CONFLUENT_RTOL = 1e-8


@dataclass(frozen=True)
class ModeSymbol:
    """Generator of the linear flow at one wavevector: ``d/dt y = -A y``."""

    xi: tuple[float, float]
    params: PhysParams

    @property
    def matrix(self) -> np.ndarray:
        x1, x2 = self.xi
        d = math.hypot(x1, x2) ** (2 * self.params.beta)
        g = self.params.gamma
        return np.array(
            [[0, 1j * x1, 1j * x2], [1j * g * x1, d, 0], [1j * g * x2, 0, d]],
            dtype=complex,
        )


def _eigenvalues(r, d, gamma):
    """Roots of ``lam^2 + d lam + gamma r^2``; first root has the larger real
    part, ties go to the smaller imaginary part."""
    r = np.asarray(r, dtype=float)
    d = np.asarray(d, dtype=float)
    disc = d * d - 4.0 * gamma * r * r
    sq = np.sqrt(np.abs(disc))
    lam_m = (-d - sq) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        # product of roots is gamma r^2; avoids cancellation in -d + sq
        lam_p = np.where(lam_m != 0, gamma * r * r / np.where(lam_m != 0, lam_m, 1.0), 0.0)
    osc = disc < 0
    lp = np.where(osc, -d / 2 - 0.5j * sq, lam_p + 0j)
    lm = np.where(osc, -d / 2 + 0.5j * sq, lam_m + 0j)
    return lp, lm


def compressible_eigen(rho: float, params: PhysParams) -> tuple[complex, complex]:
    """Eigenvalues of the density / longitudinal-velocity block at ``|xi| = rho``."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    lp, lm = _eigenvalues(rho, rho ** (2 * params.beta), params.gamma)
    return complex(lp), complex(lm)


def _expm1c(z):
    """``exp(z) - 1`` for complex ``z`` without cancellation near 0."""
    x, y = z.real, z.imag
    re = np.expm1(x) * np.cos(y) - 2.0 * np.sin(y / 2) ** 2
    im = np.exp(x) * np.sin(y)
    return re + 1j * im


def exp_coefficients(r, d, gamma, t):
    """Return ``(c0, c1)`` with ``exp(t M) = c0 I + c1 M`` (both real)."""
    if np.any(np.asarray(t) < 0):
        raise NegativeTime(f"t = {t}")
    lp, lm = _eigenvalues(r, d, gamma)
    delta = lp - lm
    z = delta * t
    confluent = np.abs(delta) < CONFLUENT_RTOL * np.maximum(1.0, np.abs(lp))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        e_m = np.exp(lm * t)
        z_safe = np.where(z == 0, 1.0, z)
        ratio = np.where(z == 0, 1.0, _expm1c(z_safe) / z_safe)
        c1_small = t * e_m * ratio
        delta_safe = np.where(delta == 0, 1.0, delta)
        c1_big = (np.exp(lp * t) - e_m) / delta_safe
        c1 = np.where(z.real > 30.0, c1_big, c1_small)
        c0 = e_m - lm * c1
        lbar = (lp + lm) / 2
        e_bar = np.exp(lbar * t)
        c1 = np.where(confluent, t * e_bar, c1)
        c0 = np.where(confluent, e_bar * (1 - lbar * t), c0)
    return np.real(c0), np.real(c1)


def _assemble(alpha, beta_m, perp, r, d, gamma, e1, e2):
    """3x3 matrices (..., 3, 3) for ``alpha I + beta_m M`` on the acoustic block
    and ``perp`` on the transverse velocity."""
    shape = np.broadcast(alpha, r, e1).shape
    P = np.zeros(shape + (3, 3), dtype=complex)
    uu = alpha - d * beta_m
    P[..., 0, 0] = alpha
    P[..., 0, 1] = -1j * r * beta_m * e1
    P[..., 0, 2] = -1j * r * beta_m * e2
    P[..., 1, 0] = -1j * gamma * r * beta_m * e1
    P[..., 2, 0] = -1j * gamma * r * beta_m * e2
    P[..., 1, 1] = uu * e1 * e1 + perp * (1 - e1 * e1)
    P[..., 2, 2] = uu * e2 * e2 + perp * (1 - e2 * e2)
    P[..., 1, 2] = (uu - perp) * e1 * e2
    P[..., 2, 1] = P[..., 1, 2]
    return P


def _unit(x1, x2):
    r = np.hypot(x1, x2)
    safe = np.where(r > 0, r, 1.0)
    return r, np.where(r > 0, x1 / safe, 0.0), np.where(r > 0, x2 / safe, 0.0)


def propagator_matrices(xi1, xi2, t, params: PhysParams) -> np.ndarray:
    """Vectorised :func:`mode_propagator` over arrays of wavevectors/times."""
    if np.any(np.asarray(t) < 0):
        raise NegativeTime(f"t = {t}")
    r, e1, e2 = _unit(np.asarray(xi1, float), np.asarray(xi2, float))
    d = r ** (2 * params.beta)
    c0, c1 = exp_coefficients(r, d, params.gamma, t)
    return _assemble(c0, c1, np.exp(-d * t), r, d, params.gamma, e1, e2)


def mode_propagator(xi, t: float, params: PhysParams) -> np.ndarray:
    """``exp(-t A(xi))`` acting on ``(a_hat, u1_hat, u2_hat)``, in closed form."""
    if t < 0:
        raise NegativeTime(f"t = {t}")
    return propagator_matrices(xi[0], xi[1], t, params)


@dataclass(frozen=True, eq=False)
class BlockFunction:
    """A function of the per-mode generator, ``alpha I + beta M`` on the
    acoustic block and ``perp`` on the transverse velocity."""

    alpha: np.ndarray
    beta: np.ndarray
    perp: np.ndarray


class LatticeSymbol:
    """The linear generator sampled on every stored lattice mode of a grid.

    The coupling uses the odd-derivative wavevector (Nyquist line zeroed, as
    in :func:`~hypocns.spectral.gradient`); the damping uses the true ``|xi|``.
    """

    def __init__(self, grid: Grid, params: PhysParams):
        self.grid = grid
        self.params = params
        self.r, self.e1, self.e2 = _unit(grid.dxi1 + 0 * grid.dxi2, grid.dxi2 + 0 * grid.dxi1)
        self.d = grid.xi_abs ** (2 * params.beta)

    def exp(self, t: float) -> BlockFunction:
        if t < 0:
            raise NegativeTime(f"t = {t}")
        c0, c1 = exp_coefficients(self.r, self.d, self.params.gamma, t)
        return BlockFunction(c0, c1, np.exp(-self.d * t))

    def phi(self, k: int, h: float, n_terms: int = 30) -> BlockFunction:
        """``phi_k(h M)`` with ``phi_0 = exp`` and ``phi_{k+1}(z) = (phi_k(z) - 1/k!)/z``."""
        if k == 0:
            return self.exp(h)
        gamma = self.params.gamma
        D = h * self.d
        G = h * h * gamma * self.r**2
        lp, lm = _eigenvalues(self.r, self.d, gamma)
        rho = h * np.maximum(np.abs(lp), np.abs(lm))

        # Taylor series in X = hM, reduced with X^2 = -D X - G I
        p, q = np.ones_like(D), np.zeros_like(D)
        a_ser = np.full_like(D, 1.0 / math.factorial(k))
        b_ser = np.zeros_like(D)
        for j in range(1, n_terms):
            p, q = -G * q, p - D * q
            f = 1.0 / math.factorial(j + k)
            a_ser += p * f
            b_ser += q * f

        # X^{-1} (phi_{j-1}(X) - I/(j-1)!) recursion where X is well away from 0
        c0, c1 = exp_coefficients(self.r, self.d, gamma, h)
        a_cur, b_cur = c0, c1 / h
        with np.errstate(divide="ignore", invalid="ignore"):
            Gs = np.where(G > 0, G, 1.0)
            ia, ib = -D / Gs, -1.0 / Gs
            for j in range(1, k + 1):
                a_cur = a_cur - 1.0 / math.factorial(j - 1)
                a_cur, b_cur = ia * a_cur - G * ib * b_cur, ia * b_cur + a_cur * ib - D * ib * b_cur
        use_series = (rho <= 1.0) | (G == 0)
        alpha = np.where(use_series, a_ser, a_cur)
        beta = np.where(use_series, b_ser, b_cur) * h
        alpha = np.where(self.r == 0, 1.0 / math.factorial(k), alpha)
        beta = np.where(self.r == 0, 0.0, beta)
        return BlockFunction(alpha, beta, _phi_scalar(k, -D))

    def apply(self, fn: BlockFunction, a_hat, u1_hat, u2_hat):
        gamma = self.params.gamma
        upar = self.e1 * u1_hat + self.e2 * u2_hat
        ma = -1j * self.r * upar
        mu = -1j * gamma * self.r * a_hat - self.d * upar
        new_a = fn.alpha * a_hat + fn.beta * ma
        new_par = fn.alpha * upar + fn.beta * mu
        new_u1 = self.e1 * new_par + fn.perp * (u1_hat - self.e1 * upar)
        new_u2 = self.e2 * new_par + fn.perp * (u2_hat - self.e2 * upar)
        return new_a, new_u1, new_u2


def _phi_scalar(k: int, z: np.ndarray, n_terms: int = 30) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    small = np.abs(z) <= 1.0
    term = np.full_like(z, 1.0 / math.factorial(k))
    ser = term.copy()
    for j in range(1, n_terms):
        term = term * z / (j + k)
        ser = ser + term
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        cur = np.exp(z)
        zs = np.where(small, 1.0, z)
        for j in range(1, k + 1):
            cur = (cur - 1.0 / math.factorial(j - 1)) / zs
    return np.where(small, ser, cur)


_SYMBOL_CACHE: dict = {}


def _lattice_symbol(grid: Grid, params: PhysParams) -> LatticeSymbol:
    key = (grid, params)
    sym = _SYMBOL_CACHE.get(key)
    if sym is None:
        if len(_SYMBOL_CACHE) > 8:
            _SYMBOL_CACHE.clear()
        sym = _SYMBOL_CACHE[key] = LatticeSymbol(grid, params)
    return sym


def evolve_linear(state0: State, t: float, params: PhysParams) -> State:
    """Exact solution of the linear system at time ``t`` on the lattice."""
    if t < 0:
        raise NegativeTime(f"t = {t}")
    sym = _lattice_symbol(state0.grid, params)
    a, u1, u2 = sym.apply(sym.exp(t), *(f.coeffs for f in state0.fields))
    return State.from_coeffs(state0.grid, a, u1, u2)


# ---------------------------------------------------------------------------
# Radial (whole-plane) theory


@dataclass(frozen=True)
class RadialProfile:
    """Radially symmetric initial data in Fourier variables.

    ``u_par_hat`` and ``u_perp_hat`` are the velocity components along and
    across ``xi``.  ``tail_radius`` bounds the support numerically: all three
    profiles are negligible (below 1e-16 relative) beyond it.
    """

    a_hat: Callable[[np.ndarray], np.ndarray]
    u_par_hat: Callable[[np.ndarray], np.ndarray]
    u_perp_hat: Callable[[np.ndarray], np.ndarray]
    tail_radius: float = 50.0

    @property
    def c0(self) -> float:
        z = np.zeros(1)
        return float(np.sqrt(self.a_hat(z)[0] ** 2 + self.u_par_hat(z)[0] ** 2 + self.u_perp_hat(z)[0] ** 2))

    def weighted_magnitude(self, r, gamma: float = 1.0) -> np.ndarray:
        """``|(sqrt(gamma) a_hat, u_hat)|`` at radius ``r``."""
        r = np.atleast_1d(np.asarray(r, float))
        return np.sqrt(gamma * self.a_hat(r) ** 2 + self.u_par_hat(r) ** 2 + self.u_perp_hat(r) ** 2)

    @classmethod
    def gaussian(cls, a: float = 1.0, u_par: float = 0.0, u_perp: float = 0.0, width: float = 1.0):
        """Profiles ``c * exp(-r^2 width^2 / 2)`` (transform of a Gaussian of
        standard deviation ``width``, up to the constant ``c``)."""

        def make(c):
            return lambda r: c * np.exp(-0.5 * (width * np.asarray(r, float)) ** 2)

        return cls(make(a), make(u_par), make(u_perp), tail_radius=math.sqrt(2 * 40.0) / width)


def _slowest_rate(r, params: PhysParams):
    lp, _ = _eigenvalues(r, r ** (2 * params.beta), params.gamma)
    return -lp.real


def _decay_radius(t: float, params: PhysParams, r_hi: float, log_tol: float = 33.0) -> float:
    """Radius beyond which ``exp(-2 t rate(r))`` is below ``exp(-log_tol)``."""
    if t <= 0 or 2 * t * _slowest_rate(r_hi, params) < log_tol:
        return r_hi
    lo, hi = 0.0, r_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 2 * t * _slowest_rate(mid, params) < log_tol:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


def _panel_edges(inner: float, outer: float, n_grade: int = 40) -> np.ndarray:
    """Geometric panels: graded towards 0 below ``inner``, doubling above it."""
    if outer <= inner:
        inner = outer
    below = inner * 2.0 ** -np.arange(n_grade, 0, -1)
    above = [inner]
    while above[-1] * 2 < outer:
        above.append(above[-1] * 2)
    if above[-1] < outer:
        above.append(outer)
    return np.concatenate([[0.0], below, above])


def _gauss_panels(edges: np.ndarray, m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    a, b = edges[:-1, None], edges[1:, None]
    half = (b - a) / 2
    nodes = (a + b) / 2 + half * x[None, :]
    return nodes.ravel(), (half * w[None, :]).ravel()


def _converged_integral(fn, edges, rtol, m0=16, m_max=1024):
    m = m0
    nodes, w = _gauss_panels(edges, m)
    prev = float(np.sum(w * fn(nodes)))
    while m < m_max:
        m *= 2
        nodes, w = _gauss_panels(edges, m)
        val = float(np.sum(w * fn(nodes)))
        if abs(val - prev) <= rtol * abs(val) or (val == 0 and prev == 0):
            return val
        prev = val
    raise QuadratureNotConverged(f"node doubling did not reach rtol={rtol}")


def r2_norm_trajectory(
    profile: RadialProfile,
    s1: float,
    times: Sequence[float],
    params: PhysParams,
    rtol: float = 1e-8,
) -> list[float]:
    """``||Lambda^s1 (sqrt(gamma) a_L, u_L)(t)||^2_{L^2(R^2)}`` at each time.

    The angular integral is exact (2 pi) because the propagator only sees
    ``|xi|`` once the velocity is split along and across ``xi``.
    """
    if s1 < 0:
        raise ValueError("s1 must be nonnegative")
    times = [float(t) for t in times]
    if any(t < 0 for t in times):
        raise NegativeTime("times must be nonnegative")
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be increasing")
    gamma, beta = params.gamma, params.beta
    out = []
    for t in times:

        def integrand(r, t=t):
            d = r ** (2 * beta)
            c0, c1 = exp_coefficients(r, d, gamma, t)
            a0, p0, q0 = profile.a_hat(r), profile.u_par_hat(r), profile.u_perp_hat(r)
            a_t = c0 * a0 - 1j * r * c1 * p0
            p_t = (c0 - d * c1) * p0 - 1j * gamma * r * c1 * a0
            q_t = np.exp(-d * t) * q0
            dens = gamma * np.abs(a_t) ** 2 + np.abs(p_t) ** 2 + np.abs(q_t) ** 2
            return 2 * np.pi * r ** (2 * s1 + 1) * dens

        inner = min(1.0, t ** (-1.0 / (2 * beta))) if t > 0 else 1.0
        outer = _decay_radius(t, params, profile.tail_radius)
        out.append(_converged_integral(integrand, _panel_edges(inner, outer), rtol))
    return out


def lower_bound_constant(c0: float, eta: float, s1: float, beta: float, rtol: float = 1e-12) -> float:
    """``C_beta = sqrt(c0^2/4 * int_{|y|<=eta} |y|^{2 s1} exp(-2|y|^{2 beta}) dy)``."""
    if c0 < 0 or eta <= 0 or s1 < 0:
        raise ValueError("need c0 >= 0, eta > 0, s1 >= 0")
    if c0 == 0:
        return 0.0

    def integrand(r):
        return 2 * np.pi * r ** (2 * s1 + 1) * np.exp(-2 * r ** (2 * beta))

    edges = _panel_edges(min(eta, 1.0), eta)
    integral = _converged_integral(integrand, edges, rtol)
    return math.sqrt(c0 * c0 / 4 * integral)


def find_eta(profile: RadialProfile, gamma: float = 1.0, c0: Optional[float] = None, r_max: Optional[float] = None) -> float:
    """Largest ``eta`` with ``|(sqrt(gamma) a_hat, u_hat)(r)| >= c0/2`` on ``[0, eta]``."""
    if c0 is None:
        c0 = float(profile.weighted_magnitude(0.0, gamma)[0])
    if c0 <= 0:
        raise ValueError("profile has no low-frequency mass")
    r_max = profile.tail_radius if r_max is None else r_max
    rs = np.linspace(0.0, r_max, 4001)
    ok = profile.weighted_magnitude(rs, gamma) >= c0 / 2
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return r_max
    lo, hi = rs[bad[0] - 1], rs[bad[0]]
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if profile.weighted_magnitude(mid, gamma)[0] >= c0 / 2:
            lo = mid
        else:
            hi = mid
    return lo
