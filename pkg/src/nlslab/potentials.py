"""Analytic potential families, hypothesis checks and the virial weight.

Every family carries closed forms for ``V`` and for the radial derivative
term ``x . grad V`` so that the decay certificate and the weight
``W = 2V + x . grad V`` never rely on grid differentiation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .grid import Grid2D

FAMILIES = ("zero", "gaussian_bump", "inverse_power")


@dataclass(frozen=True)
class PotentialTerm:
    family: str
    c0: float = 0.0
    w: float = 1.0
    beta: float = 4.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown potential family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "gaussian_bump" and not self.w > 0:
            raise ConfigurationError("gaussian_bump width w must be positive")
        if self.family == "inverse_power" and not self.beta > 0:
            raise ConfigurationError("inverse_power decay beta must be positive")

    def value(self, r2: np.ndarray) -> np.ndarray:
        if self.family == "gaussian_bump":
            return self.c0 * np.exp(-r2 / (2.0 * self.w**2))
        if self.family == "inverse_power":
            return self.c0 * (1.0 + r2) ** (-self.beta / 2.0)
        return np.zeros_like(r2)

    def radial_derivative(self, r2: np.ndarray) -> np.ndarray:
        """``x . grad V`` in closed form."""
        if self.family == "gaussian_bump":
            return -(r2 / self.w**2) * self.value(r2)
        if self.family == "inverse_power":
            return -self.beta * self.c0 * r2 * (1.0 + r2) ** (-self.beta / 2.0 - 1.0)
        return np.zeros_like(r2)

    def describe(self) -> str:
        if self.family == "gaussian_bump":
            return f"gaussian_bump(c0={self.c0:g}, w={self.w:g})"
        if self.family == "inverse_power":
            return f"inverse_power(c0={self.c0:g}, beta={self.beta:g})"
        return "zero"


@dataclass(frozen=True)
class PotentialSpec:
    """A sum of analytic terms; the empty sum is the zero potential."""

    terms: tuple[PotentialTerm, ...] = field(default_factory=tuple)

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls(())

    @classmethod
    def gaussian_bump(cls, c0: float = 1.0, w: float = 1.0) -> "PotentialSpec":
        return cls((PotentialTerm("gaussian_bump", c0=c0, w=w),))

    @classmethod
    def inverse_power(cls, c0: float = 1.0, beta: float = 4.0) -> "PotentialSpec":
        return cls((PotentialTerm("inverse_power", c0=c0, beta=beta),))

    def __add__(self, other: "PotentialSpec") -> "PotentialSpec":
        return PotentialSpec(self.terms + other.terms)

    def scaled(self, factor: float) -> "PotentialSpec":
        return PotentialSpec(tuple(
            PotentialTerm(t.family, c0=t.c0 * factor, w=t.w, beta=t.beta) for t in self.terms
        ))

    @property
    def is_zero(self) -> bool:
        return all(t.family == "zero" or t.c0 == 0 for t in self.terms)

    def value(self, r2: np.ndarray) -> np.ndarray:
        out = np.zeros_like(np.asarray(r2, dtype=float))
        for t in self.terms:
            out = out + t.value(r2)
        return out

    def radial_derivative(self, r2: np.ndarray) -> np.ndarray:
        out = np.zeros_like(np.asarray(r2, dtype=float))
        for t in self.terms:
            out = out + t.radial_derivative(r2)
        return out

    def describe(self) -> str:
        return " + ".join(t.describe() for t in self.terms) or "zero"


def sample_potential(spec: PotentialSpec, grid: Grid2D) -> np.ndarray:
    """Real samples of ``V`` at the grid nodes."""
    return spec.value(grid.r2)


def virial_weight(spec: PotentialSpec, grid: Grid2D) -> np.ndarray:
    """``W = 2V + x . grad V`` from the closed forms."""
    return 2.0 * spec.value(grid.r2) + spec.radial_derivative(grid.r2)


@dataclass(frozen=True)
class HypothesisReport:
    h1_constant: float
    h1_beta_used: float
    h2_min: float
    boundary_leak: float
    boundary_floor: float
    h1_pass: bool
    h2_pass: bool
    boundary_pass: bool

    @property
    def passed(self) -> bool:
        return self.h1_pass and self.h2_pass and self.boundary_pass


def check_hypotheses(spec: PotentialSpec, grid: Grid2D, beta: float = 4.0,
                     boundary_rel_floor: float = 1e-10) -> HypothesisReport:
    """Certificate of the decay/positivity hypotheses over the computational box.

    ``h1_constant`` is the smallest ``c`` with ``<x>**beta (|V| + |x.grad V|) <= c``
    at every node.  Never raises on a failed hypothesis; the verdicts say so.
    """
    if beta <= 3:
        warnings.warn(f"decay exponent beta={beta} is outside the standing range beta > 3", stacklevel=2)
    r2 = grid.r2
    V = spec.value(r2)
    xdv = spec.radial_derivative(r2)
    c = float(np.max((1.0 + r2) ** (beta / 2.0) * (np.abs(V) + np.abs(xdv))))
    ring = np.concatenate([V[0, :], V[-1, :], V[:, 0], V[:, -1]])
    leak = float(np.max(np.abs(ring)))
    sup = float(np.max(np.abs(V)))
    floor = boundary_rel_floor * sup
    h2_min = float(np.min(V))
    return HypothesisReport(
        h1_constant=c,
        h1_beta_used=float(beta),
        h2_min=h2_min,
        boundary_leak=leak,
        boundary_floor=floor,
        h1_pass=bool(np.isfinite(c) and beta > 3),
        h2_pass=h2_min >= 0,
        boundary_pass=leak <= floor,
    )
