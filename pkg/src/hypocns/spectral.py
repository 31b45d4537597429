"""Periodic-grid fields and the Fourier multipliers built on them.

Coefficients are stored in the real-FFT half layout, shape ``(n, n//2 + 1)``:
axis 0 carries the signed integer mode ``k1`` (``numpy.fft.fftfreq`` order),
axis 1 carries ``k2 = 0 .. n/2``.  The remaining half of the lattice is
implied by Hermitian symmetry, ``c(-k) = conj(c(k))``.

Normalisation is ``f(x) = sum_k c(k) exp(i xi_k . x)`` with ``xi_k = 2 pi k / L``,
so ``||f||_{L^2}^2 = L^2 sum_k |c(k)|^2`` holds exactly and ``L^2 c(k)``
approximates the continuous transform ``int exp(-i x.xi) f(x) dx``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from .errors import DomainViolation, GridMismatch, NegativeOrderOnNonzeroMean

__all__ = [
    "Grid",
    "SpectralField",
    "State",
    "PhysParams",
    "lambda_s",
    "gradient",
    "divergence",
    "pointwise_product",
    "pointwise_map",
    "hermitian_defect",
]


@dataclass(frozen=True)
class Grid:
    """Square periodic box ``[0, box_len)^2`` sampled with ``n`` points per side."""

    n: int
    box_len: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 4, got {self.n}")
        if not self.box_len > 0:
            raise ValueError(f"box_len must be positive, got {self.box_len}")

    @property
    def dx(self) -> float:
        return self.box_len / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n // 2 + 1)

    @cached_property
    def k1(self) -> np.ndarray:
        """Integer modes along axis 0, column vector."""
        return np.rint(np.fft.fftfreq(self.n) * self.n).astype(int)[:, None]

    @cached_property
    def k2(self) -> np.ndarray:
        return np.arange(self.n // 2 + 1)[None, :]

    @cached_property
    def xi1(self) -> np.ndarray:
        return 2 * np.pi * self.k1 / self.box_len

    @cached_property
    def xi2(self) -> np.ndarray:
        return 2 * np.pi * self.k2 / self.box_len

    @cached_property
    def xi_abs(self) -> np.ndarray:
        out = np.sqrt(self.xi1**2 + self.xi2**2)
        out.setflags(write=False)
        return out

    # Odd-derivative wavenumbers: the Nyquist line is its own mirror image,
    # so i*xi there would break Hermitian symmetry; it is zeroed.
    @cached_property
    def dxi1(self) -> np.ndarray:
        return np.where(self.k1 == -self.n // 2, 0.0, self.xi1)

    @cached_property
    def dxi2(self) -> np.ndarray:
        return np.where(self.k2 == self.n // 2, 0.0, self.xi2)

    @cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of each stored mode in sums over the full lattice."""
        w = np.full(self.shape, 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        w.setflags(write=False)
        return w

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3 rule: keep ``|k_i| <= (n-1)//3`` in both directions, which is
        ``|k_i| <= n/3`` unless 3 divides n (then the edge shell would alias)."""
        cut = (self.n - 1) // 3
        return (np.abs(self.k1) <= cut) & (self.k2 <= cut)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.n) * self.dx
        return np.meshgrid(x, x, indexing="ij")

    def spectral_sum(self, values: np.ndarray) -> float:
        """Sum a per-mode real quantity over the whole lattice."""
        return float(np.sum(self.weights * values))

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        return sfft.rfft2(values) / self.n**2

    def to_physical(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.irfft2(coeffs * self.n**2, s=(self.n, self.n))

    def full_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        """Expand half-layout coefficients to the full ``(n, n)`` lattice."""
        n = self.n
        full = np.empty((n, n), dtype=complex)
        full[:, : n // 2 + 1] = coeffs
        neg_k1 = (-np.arange(n)) % n
        for col in range(n // 2 + 1, n):
            full[:, col] = np.conj(coeffs[neg_k1, n - col])
        return full


class SpectralField:
    """One real scalar field on a :class:`Grid`, held by its Fourier coefficients.

    Instances are immutable; the physical-grid values are computed lazily and
    cached.
    """

    __slots__ = ("grid", "coeffs", "_physical")

    def __init__(self, grid: Grid, coeffs: np.ndarray):
        coeffs = np.array(coeffs, dtype=complex)
        if coeffs.shape != grid.shape:
            raise ValueError(f"expected coefficients of shape {grid.shape}, got {coeffs.shape}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "_physical", None)

    def __setattr__(self, name, value):
        raise AttributeError("SpectralField is immutable")

    def __repr__(self):
        return f"SpectralField(n={self.grid.n}, box_len={self.grid.box_len})"

    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> "SpectralField":
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n, grid.n):
            raise ValueError(f"expected physical array of shape {(grid.n, grid.n)}")
        field = cls(grid, grid.to_spectral(values))
        return field

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @property
    def physical(self) -> np.ndarray:
        if self._physical is None:
            values = self.grid.to_physical(self.coeffs)
            values.setflags(write=False)
            object.__setattr__(self, "_physical", values)
        return self._physical

    @property
    def mean(self) -> complex:
        return complex(self.coeffs[0, 0])

    def full(self) -> np.ndarray:
        return self.grid.full_coeffs(self.coeffs)

    def l2_norm(self) -> float:
        """Plancherel ``L^2`` norm from the coefficients."""
        return self.grid.box_len * np.sqrt(self.grid.spectral_sum(np.abs(self.coeffs) ** 2))

    def physical_l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.physical**2)) * self.grid.dx)

    def coeff_norm(self) -> float:
        return float(np.sqrt(self.grid.spectral_sum(np.abs(self.coeffs) ** 2)))

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def without_mean(self) -> "SpectralField":
        c = self.coeffs.copy()
        c[0, 0] = 0.0
        return SpectralField(self.grid, c)

    def dealiased(self) -> "SpectralField":
        """Truncate to the 2/3-rule band; returns ``self`` when already inside it."""
        mask = self.grid.dealias_mask
        if not np.any(self.coeffs[~mask]):
            return self
        return SpectralField(self.grid, np.where(mask, self.coeffs, 0.0))

    def _check(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise GridMismatch(f"{self.grid} vs {other.grid}")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        if isinstance(scalar, SpectralField):
            raise TypeError("use pointwise_product for field products")
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class PhysParams:
    """Dissipation exponent ``beta`` and adiabatic exponent ``gamma``.

    The shear and bulk viscosities are fixed at ``mu = 1, nu = -1`` and the
    pressure law is ``P(rho) = rho**gamma``.
    """

    beta: float
    gamma: float = 1.0

    def __post_init__(self):
        if not 0.5 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [1/2, 1), got {self.beta}")
        if not self.gamma >= 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")


@dataclass(frozen=True, eq=False)
class State:
    """Density perturbation ``a`` (``rho = 1 + a``) and velocity ``u = (u1, u2)``."""

    a: SpectralField
    u: tuple[SpectralField, SpectralField]

    def __post_init__(self):
        u = tuple(self.u)
        if len(u) != 2:
            raise ValueError("velocity must have two components")
        object.__setattr__(self, "u", u)
        for f in u:
            if f.grid != self.a.grid:
                raise GridMismatch("all state fields must share one grid")

    @property
    def grid(self) -> Grid:
        return self.a.grid

    @property
    def fields(self) -> tuple[SpectralField, SpectralField, SpectralField]:
        return (self.a, self.u[0], self.u[1])

    @classmethod
    def zeros(cls, grid: Grid) -> "State":
        z = SpectralField.zeros(grid)
        return cls(z, (z, z))

    @classmethod
    def from_coeffs(cls, grid: Grid, a_hat, u1_hat, u2_hat) -> "State":
        return cls(SpectralField(grid, a_hat), (SpectralField(grid, u1_hat), SpectralField(grid, u2_hat)))

    def scaled(self, c: float) -> "State":
        return State(self.a * c, (self.u[0] * c, self.u[1] * c))

    def min_density(self) -> float:
        return float(1.0 + self.a.physical.min())

    def is_admissible(self) -> bool:
        return self.min_density() > 0.0


def hermitian_defect(f: SpectralField) -> float:
    """Largest ``|c(-k) - conj(c(k))|`` over the lattice.

    Only the self-mirrored columns ``k2 = 0`` and ``k2 = n/2`` can violate the
    symmetry in the half layout; the rest of the lattice is implied.
    """
    n = f.grid.n
    neg = (-np.arange(n)) % n
    worst = 0.0
    for col in (0, n // 2):
        c = f.coeffs[:, col]
        worst = max(worst, float(np.max(np.abs(c[neg] - np.conj(c)))))
    return worst


def _mean_is_zero(f: SpectralField, rtol: float = 1e-14) -> bool:
    return abs(f.coeffs[0, 0]) <= rtol * f.coeff_norm()


def lambda_s(f: SpectralField, s: float) -> SpectralField:
    """Apply the Riesz multiplier ``|xi|^s``.

    The mean mode is dropped for ``s > 0`` and passed through for ``s == 0``.
    Negative orders are undefined on constants and raise on a nonzero mean.
    """
    if s == 0:
        return f
    if s < 0 and not _mean_is_zero(f):
        raise NegativeOrderOnNonzeroMean(f"Lambda^{s} applied to a field with mean {f.mean!r}")
    r = f.grid.xi_abs
    with np.errstate(divide="ignore"):
        mult = np.where(r > 0, r, 1.0) ** s
    mult[0, 0] = 0.0
    return SpectralField(f.grid, f.coeffs * mult)


def gradient(f: SpectralField) -> tuple[SpectralField, SpectralField]:
    g = f.grid
    return (SpectralField(g, 1j * g.dxi1 * f.coeffs), SpectralField(g, 1j * g.dxi2 * f.coeffs))


def divergence(v: tuple[SpectralField, SpectralField]) -> SpectralField:
    v1, v2 = v
    v1._check(v2)
    g = v1.grid
    return SpectralField(g, 1j * (g.dxi1 * v1.coeffs + g.dxi2 * v2.coeffs))


def pointwise_product(f: SpectralField, g: SpectralField, dealias: bool = True) -> SpectralField:
    """Multiply on the physical grid; with ``dealias`` both factors and the
    result are truncated to the 2/3 band."""
    f._check(g)
    if dealias:
        f, g = f.dealiased(), g.dealiased()
    out = SpectralField.from_physical(f.grid, f.physical * g.physical)
    return out.dealiased() if dealias else out


def pointwise_map(
    f: SpectralField,
    phi: Callable[[np.ndarray], np.ndarray],
    domain: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> SpectralField:
    """Evaluate ``phi`` at every physical grid point and transform back.

    No dealiasing is applied.  ``domain`` is an optional predicate on the
    physical values; any point outside it, or any non-finite output, raises
    :class:`DomainViolation`.
    """
    x = f.physical
    if domain is not None and not np.all(domain(x)):
        raise DomainViolation(f"field leaves the domain of the map (min {x.min():.3g}, max {x.max():.3g})")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        y = np.asarray(phi(x), dtype=float)
    if not np.all(np.isfinite(y)):
        raise DomainViolation("map is singular at some grid point")
    return SpectralField.from_physical(f.grid, y)
