"""Dyadic frequency blocks, Besov/Sobolev/Lebesgue norms and
Gagliardo-Nirenberg ratio checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import JOutOfRange, MeanModeNotZero, NoAdmissibleTheta, ZeroField
from .spectral import Grid, SpectralField, lambda_s

__all__ = [
    "chi",
    "phi",
    "DyadicPartition",
    "build_partition",
    "lp_block",
    "NormRequest",
    "norm",
    "gn_exponent",
    "gn_ratio",
]

_INNER = 3.0 / 4.0
_OUTER = 4.0 / 3.0


def _h(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def chi(r):
    """Smooth radial cutoff: 1 on ``r <= 3/4``, 0 on ``r >= 4/3``."""
    r = np.asarray(r, dtype=float)
    x = np.clip((_OUTER - r) / (_OUTER - _INNER), 0.0, 1.0)
    hx, h1x = _h(x), _h(1.0 - x)
    return hx / (hx + h1x)


def phi(r):
    """Annulus profile ``chi(r/2) - chi(r)``, supported in ``3/4 < r < 8/3``."""
    r = np.asarray(r, dtype=float)
    return chi(r / 2.0) - chi(r)


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    grid: Grid
    j_min: int
    j_max: int
    blocks: np.ndarray  # (j_max - j_min + 1, *grid.shape); blocks[i] = phi(2^-(j_min+i) xi)

    @property
    def js(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def block(self, j: int) -> np.ndarray:
        if not self.j_min <= j <= self.j_max:
            raise JOutOfRange(f"j={j} outside [{self.j_min}, {self.j_max}]")
        return self.blocks[j - self.j_min]


@lru_cache(maxsize=8)
def build_partition(grid: Grid) -> DyadicPartition:
    xi_min = 2 * np.pi / grid.box_len
    xi_max = float(grid.xi_abs.max())
    j_min = math.floor(math.log2(3 * xi_min / 8))
    j_max = math.ceil(math.log2(4 * xi_max / 3))
    r = grid.xi_abs
    blocks = np.stack([phi(r * 2.0**-j) for j in range(j_min, j_max + 1)])
    blocks.setflags(write=False)
    return DyadicPartition(grid, j_min, j_max, blocks)


def lp_block(f: SpectralField, j: int, part: DyadicPartition) -> SpectralField:
    """Homogeneous dyadic block: coefficients times ``phi(2^-j xi)``."""
    w = part.block(j)
    c = f.coeffs * w
    c[0, 0] = 0.0
    return SpectralField(f.grid, c)


@dataclass(frozen=True)
class NormRequest:
    """Which norm to evaluate.  Build with the classmethods, e.g. ``NormRequest.Besov(-1, inf)``."""

    kind: str
    s: float = 0.0
    p: float = 2.0
    r: float = 2.0

    def __post_init__(self):
        if self.kind not in ("L2", "Lp", "Hs", "HomHs", "Besov"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind == "Lp" and not self.p >= 2:
            raise ValueError("Lp norms need p in [2, inf]")
        if self.kind == "Besov" and self.r not in (1, 2, math.inf):
            raise ValueError("Besov third index must be 1, 2 or inf")

    @classmethod
    def L2(cls):
        return cls("L2")

    @classmethod
    def Lp(cls, p):
        return cls("Lp", p=float(p))

    @classmethod
    def Hs(cls, s):
        return cls("Hs", s=float(s))

    @classmethod
    def HomHs(cls, s):
        return cls("HomHs", s=float(s))

    @classmethod
    def Besov(cls, s, r):
        return cls("Besov", s=float(s), r=float(r))


def _require_zero_mean(f: SpectralField, what: str):
    if abs(f.coeffs[0, 0]) > 1e-14 * f.coeff_norm():
        raise MeanModeNotZero(f"{what} of a field with nonzero mean {f.mean!r}")


def besov_blocks(f: SpectralField, s: float, part: DyadicPartition) -> np.ndarray:
    """``2^{js} ||Delta_j f||_{L^2}`` for every j in the partition."""
    g = f.grid
    a2 = g.weights * np.abs(f.coeffs) ** 2
    a2[0, 0] = 0.0
    sums = np.tensordot(part.blocks**2, a2, axes=([1, 2], [0, 1]))
    js = np.arange(part.j_min, part.j_max + 1)
    return 2.0 ** (js * s) * g.box_len * np.sqrt(sums)


def norm(f: SpectralField, req: NormRequest, part: Optional[DyadicPartition] = None) -> float:
    g = f.grid
    L = g.box_len
    c2 = np.abs(f.coeffs) ** 2
    if req.kind == "L2" or (req.kind == "Lp" and req.p == 2):
        return f.l2_norm()
    if req.kind == "Lp":
        x = np.abs(f.physical)
        if math.isinf(req.p):
            return float(x.max())
        return float((np.sum(x**req.p) * g.dx**2) ** (1.0 / req.p))
    if req.kind == "Hs":
        return float(L * np.sqrt(g.spectral_sum((1 + g.xi_abs**2) ** req.s * c2)))
    if req.kind == "HomHs":
        if req.s < 0:
            _require_zero_mean(f, f"HomHs({req.s})")
        return lambda_s(f, req.s).l2_norm()
    # Besov
    if req.s <= 0:
        _require_zero_mean(f, f"Besov({req.s}, {req.r})")
    if part is None:
        part = build_partition(g)
    elif part.grid != g:
        raise ValueError("partition built for another grid")
    b = besov_blocks(f, req.s, part)
    if math.isinf(req.r):
        return float(b.max())
    return float(np.sum(b**req.r) ** (1.0 / req.r))


def gn_exponent(s: float, s1: float, s2: float, p: float) -> float:
    """Interpolation weight solving ``s + 1 - 2/p = (1-theta) s1 + theta s2``."""
    if not (s2 > s1 >= 0 and s >= 0 and p >= 2):
        raise NoAdmissibleTheta(f"need s2 > s1 >= 0, s >= 0, p >= 2; got s={s}, s1={s1}, s2={s2}, p={p}")
    theta = (s + 1 - 2.0 / p - s1) / (s2 - s1)
    if math.isinf(p):
        # endpoint case: strict interpolation and s1 <= s
        if not (0 < theta < 1 and s1 <= s):
            raise NoAdmissibleTheta(f"p = inf needs 0 < theta < 1 and s1 <= s, got theta={theta}")
    elif not 0 <= theta <= 1:
        raise NoAdmissibleTheta(f"theta={theta} outside [0, 1]")
    return theta


def gn_ratio(f: SpectralField, s: float, s1: float, s2: float, p: float) -> float:
    """``||Lambda^s f||_{L^p} / (||Lambda^s1 f||^(1-theta) ||Lambda^s2 f||^theta)``."""
    theta = gn_exponent(s, s1, s2, p)
    if f.coeff_norm() == 0:
        raise ZeroField("Gagliardo-Nirenberg ratio of the zero field")
    _require_zero_mean(f, "Gagliardo-Nirenberg ratio")
    num = norm(lambda_s(f, s), NormRequest.Lp(p))
    den = lambda_s(f, s1).l2_norm() ** (1 - theta) * lambda_s(f, s2).l2_norm() ** theta
    return num / den
