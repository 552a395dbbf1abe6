"""Periodic 2D grid, spectral transforms and the norms of the weighted Sobolev scale.

Fields are plain complex ``numpy`` arrays of shape ``(n, n)`` (or a stack
``(..., n, n)``) sampled at the nodes of a :class:`Grid2D`; axis 0 is ``x``,
axis 1 is ``y``.  The discrete L2 inner product carries the cell weight
``h**2`` so that it approximates the integral over the box.

Transform convention: coefficients approximate the unitary continuous
Fourier transform ``(2*pi)**-1 * integral f(x) exp(-i k.x) dx`` sampled on the
wavenumber lattice, so Parseval reads ``||f||_2**2 = sum |c_k|**2 * dk**2``
with ``dk = pi / L`` and multipliers such as ``|k|**s`` carry no stray
factors of ``2*pi``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, DomainError

__all__ = [
    "Grid2D",
    "make_grid",
    "to_spectral",
    "from_spectral",
    "apply_multiplier",
    "inner",
    "l2_norm",
    "lp_norm",
    "free_fractional_laplacian",
    "free_laplacian",
    "gradient",
    "NormKind",
    "norm",
    "PowerWeight",
    "BracketWeight",
    "GalileiPhase",
    "multiply_by_weight",
    "galilei_phase",
    "check_finite",
    "write_field_binary",
    "read_field_binary",
    "write_field_csv",
]


def _fft_friendly(n: int) -> bool:
    if n % 3 == 0:
        n //= 3
    return n & (n - 1) == 0


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic ``n x n`` discretization of ``[-L, L)**2``."""

    n: int
    L: float

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 8 or not _fft_friendly(int(n)):
            raise ConfigurationError(f"n must be a power of two (or three times one), n >= 8; got {n!r}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ConfigurationError(f"L must be positive, got {self.L!r}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def dk(self) -> float:
        return np.pi / self.L

    @property
    def area(self) -> float:
        return 4.0 * self.L**2

    @property
    def k_max(self) -> float:
        """Largest representable wavenumber per axis (the Nyquist value)."""
        return np.pi / self.h

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def mode_index(self) -> np.ndarray:
        """Integer lattice index ``m`` in FFT order, ``m`` in ``[-n/2, n/2)``."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)

    @cached_property
    def k(self) -> np.ndarray:
        """1D wavenumbers ``(pi/L) * m`` in FFT order."""
        return self.dk * self.mode_index

    @cached_property
    def XY(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.x, self.x, indexing="ij"))

    @property
    def X(self) -> np.ndarray:
        return self.XY[0]

    @property
    def Y(self) -> np.ndarray:
        return self.XY[1]

    @cached_property
    def r2(self) -> np.ndarray:
        return self.X**2 + self.Y**2

    @cached_property
    def KXY(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.k, self.k, indexing="ij"))

    @cached_property
    def KXY_odd(self) -> tuple[np.ndarray, np.ndarray]:
        """Wavenumbers with the Nyquist row/column zeroed, for odd-order multipliers."""
        nyq = self.mode_index == -(self.n // 2)
        kx = np.where(nyq, 0.0, self.k)
        return tuple(np.meshgrid(kx, kx, indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky = self.KXY
        return kx**2 + ky**2

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(i k L) = (-1)**m accounts for the first node sitting at -L.
        sign = np.where(self.mode_index % 2, -1.0, 1.0)
        return np.outer(sign, sign)

    def zeros(self) -> np.ndarray:
        return np.zeros((self.n, self.n), dtype=complex)

    def plane_wave(self, mx: int, my: int) -> np.ndarray:
        """``exp(i k.x)`` for the lattice wavenumber ``k = (pi/L) (mx, my)``."""
        return np.exp(1j * self.dk * (mx * self.X + my * self.Y))

    def gaussian(self, width: float = 1.0, center=(0.0, 0.0)) -> np.ndarray:
        x0, y0 = center
        return np.exp(-((self.X - x0) ** 2 + (self.Y - y0) ** 2) / (2.0 * width**2)).astype(complex)


def make_grid(n: int, L: float) -> Grid2D:
    """Build a grid; raises :class:`ConfigurationError` for bad ``n`` or ``L``."""
    return Grid2D(n, L)


def to_spectral(grid: Grid2D, f: np.ndarray) -> np.ndarray:
    c = sfft.fft2(f, axes=(-2, -1))
    return c * (grid._phase * grid.h**2 / (2.0 * np.pi))


def from_spectral(grid: Grid2D, c: np.ndarray) -> np.ndarray:
    f = sfft.ifft2(c * grid._phase, axes=(-2, -1))
    return f * (2.0 * np.pi / grid.h**2)


def apply_multiplier(f: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    """Apply a Fourier multiplier given on the FFT-ordered lattice."""
    return sfft.ifft2(multiplier * sfft.fft2(f, axes=(-2, -1)), axes=(-2, -1))


def inner(grid: Grid2D, f: np.ndarray, g: np.ndarray):
    """Discrete ``<f, g> = h**2 sum f conj(g)`` (reduced over the last two axes)."""
    return grid.h**2 * np.sum(f * np.conj(g), axis=(-2, -1))


def l2_norm(grid: Grid2D, f: np.ndarray):
    return grid.h * np.sqrt(np.sum(np.abs(f) ** 2, axis=(-2, -1)))


def lp_norm(grid: Grid2D, f: np.ndarray, p: float):
    a = np.abs(f)
    if np.isinf(p):
        return np.max(a, axis=(-2, -1))
    if p < 1:
        raise DomainError(f"p must lie in [1, inf], got {p}")
    if p == 2:
        return l2_norm(grid, f)
    return (grid.h**2 * np.sum(a**p, axis=(-2, -1))) ** (1.0 / p)


def free_fractional_laplacian(grid: Grid2D, f: np.ndarray, s: float) -> np.ndarray:
    """``(-Delta)**(s/2) f`` as the multiplier ``|k|**s`` (zero mode sent to 0 for s > 0)."""
    if s < 0:
        raise DomainError(f"exponent s must be >= 0, got {s}")
    if s == 0:
        return np.array(f, dtype=complex, copy=True)
    return apply_multiplier(f, grid.kabs**s)


def free_laplacian(grid: Grid2D, f: np.ndarray) -> np.ndarray:
    """Spectral ``Delta f``."""
    return apply_multiplier(f, -grid.k2)


def gradient(grid: Grid2D, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    F = sfft.fft2(f, axes=(-2, -1))
    kx, ky = grid.KXY_odd
    return sfft.ifft2(1j * kx * F, axes=(-2, -1)), sfft.ifft2(1j * ky * F, axes=(-2, -1))


@dataclass(frozen=True)
class NormKind:
    """Which norm to evaluate.

    Use the constructors: ``NormKind.Lp(p)``, ``NormKind.Sobolev(m, s)`` for
    ``H^{m,s}``, ``NormKind.HomogeneousDerivative(s)`` for ``Hdot^{s,0}``,
    ``NormKind.HomogeneousWeight(s)`` for ``Hdot^{0,s}`` and
    ``NormKind.WeightedLp(p, s)`` for ``L^{p,s}``.
    """

    tag: str
    p: float = 2.0
    m: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        if not (1 <= self.p <= np.inf):
            raise DomainError(f"p must lie in [1, inf], got {self.p}")
        if self.tag in ("HomogeneousDerivative", "HomogeneousWeight") and self.s < 0:
            raise DomainError("homogeneous norms need s >= 0")
        if self.tag not in ("Lp", "Sobolev", "HomogeneousDerivative", "HomogeneousWeight", "WeightedLp"):
            raise DomainError(f"unknown norm kind {self.tag!r}")

    @classmethod
    def Lp(cls, p):
        return cls("Lp", p=float(p))

    @classmethod
    def Sobolev(cls, m, s):
        return cls("Sobolev", m=float(m), s=float(s))

    @classmethod
    def HomogeneousDerivative(cls, s):
        return cls("HomogeneousDerivative", s=float(s))

    @classmethod
    def HomogeneousWeight(cls, s):
        return cls("HomogeneousWeight", s=float(s))

    @classmethod
    def WeightedLp(cls, p, s):
        return cls("WeightedLp", p=float(p), s=float(s))


def norm(grid: Grid2D, f: np.ndarray, kind: NormKind):
    if kind.tag == "Lp":
        return lp_norm(grid, f, kind.p)
    if kind.tag == "Sobolev":
        g = apply_multiplier(f, (1.0 + grid.k2) ** (kind.m / 2.0)) if kind.m else f
        return l2_norm(grid, (1.0 + grid.r2) ** (kind.s / 2.0) * g)
    if kind.tag == "HomogeneousDerivative":
        return l2_norm(grid, free_fractional_laplacian(grid, f, kind.s))
    if kind.tag == "HomogeneousWeight":
        return l2_norm(grid, grid.r2 ** (kind.s / 2.0) * f)
    return lp_norm(grid, (1.0 + grid.r2) ** (kind.s / 2.0) * f, kind.p)


@dataclass(frozen=True)
class PowerWeight:
    """``|x|**s``."""

    s: float

    def sample(self, grid: Grid2D) -> np.ndarray:
        return grid.r2 ** (self.s / 2.0)


@dataclass(frozen=True)
class BracketWeight:
    """``<x>**s = (1 + |x|**2)**(s/2)``."""

    s: float

    def sample(self, grid: Grid2D) -> np.ndarray:
        return (1.0 + grid.r2) ** (self.s / 2.0)


@dataclass(frozen=True)
class GalileiPhase:
    """The unimodular multiplier ``M(t) = exp(-i |x|**2 / (2 t))``."""

    t: float

    def __post_init__(self):
        if self.t == 0:
            raise DomainError("M(t) is undefined at t = 0")

    def sample(self, grid: Grid2D) -> np.ndarray:
        return np.exp(-0.5j * grid.r2 / self.t)


def galilei_phase(grid: Grid2D, t: float) -> np.ndarray:
    return GalileiPhase(t).sample(grid)


def multiply_by_weight(grid: Grid2D, f: np.ndarray, weight) -> np.ndarray:
    """Pointwise product with a weight descriptor (anything with ``sample(grid)``)."""
    return weight.sample(grid) * f


def check_finite(f: np.ndarray, what: str = "field") -> np.ndarray:
    if not np.all(np.isfinite(f)):
        from .errors import NumericError

        raise NumericError(f"{what} contains non-finite samples")
    return f


# -- field snapshots -------------------------------------------------------------

_HEADER = np.dtype([("n", "<i8"), ("L", "<f8")])


def write_field_binary(path, grid: Grid2D, f: np.ndarray) -> None:
    """Header ``(n, L)`` as little-endian int64/float64, then ``n*n`` (re, im) float64 pairs, row-major."""
    f = np.asarray(f, dtype=complex)
    if f.shape != (grid.n, grid.n):
        raise ConfigurationError(f"field shape {f.shape} does not match grid n={grid.n}")
    header = np.array([(grid.n, grid.L)], dtype=_HEADER)
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(f).astype("<c16").tobytes())


def read_field_binary(path) -> tuple[Grid2D, np.ndarray]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.itemsize:
        raise ConfigurationError(f"{path}: truncated header")
    header = np.frombuffer(raw[: _HEADER.itemsize], dtype=_HEADER)[0]
    grid = Grid2D(int(header["n"]), float(header["L"]))
    body = raw[_HEADER.itemsize:]
    if len(body) != 16 * grid.n**2:
        raise ConfigurationError(f"{path}: expected {grid.n**2} complex samples")
    return grid, np.frombuffer(body, dtype="<c16").reshape(grid.n, grid.n).astype(complex)


def write_field_csv(path, grid: Grid2D, f: np.ndarray) -> None:
    """Columns ``x, y, re, im`` with a header row."""
    f = np.asarray(f, dtype=complex)
    data = np.column_stack([grid.X.ravel(), grid.Y.ravel(), f.real.ravel(), f.imag.ravel()])
    np.savetxt(path, data, delimiter=",", header="x,y,re,im", comments="", fmt="%.17g")
