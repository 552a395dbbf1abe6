"""The commutator operator A(s), the dilation generator and Galilei identities.

``A(s) = s (-Delta_V)**(s/2) + [x.grad, (-Delta_V)**(s/2)]`` is computed two
ways: directly from the eigenbasis power and the spectral dilation, and as
the resolvent sandwich ``c(s) int tau**(s/2) R(tau) W R(tau) dtau`` with the
virial weight ``W = 2V + x.grad V``.

Identity checks act on a fixed field ``f`` (time independent), so every
``[i d/dt, B(t)] f`` reduces to ``i B'(t) f``, evaluated with centred
differences.  Verification fields must be centred and rapidly decaying;
``laguerre_gaussian`` fields additionally have vanishing low moments, which
keeps the slowly decaying tails of ``(-Delta)**(s/2) f`` from wrapping around
the periodic box.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.fft as sfft

from .errors import DomainError
from .grid import Grid2D, apply_multiplier, free_laplacian, galilei_phase, gradient, l2_norm
from .operators import (
    QuadratureRule,
    SpectralOperator,
    c_of_s,
    fractional_power,
    fractional_power_spectral,
    resolvent_apply,
)

DIM = 2


def dilation_apply(grid: Grid2D, f: np.ndarray) -> np.ndarray:
    """``S f = x . grad f`` with spectral derivatives (Nyquist mode zeroed)."""
    fx, fy = gradient(grid, f)
    return grid.X * fx + grid.Y * fy


def band_energy_fraction(grid: Grid2D, f: np.ndarray) -> float:
    """Fraction of spectral energy in the top third of the lattice (per axis)."""
    F = np.abs(sfft.fft2(f)) ** 2
    m = np.abs(grid.mode_index)
    top = (m[:, None] > grid.n // 3) | (m[None, :] > grid.n // 3)
    total = F.sum()
    return float(F[top].sum() / total) if total else 0.0


def laguerre_gaussian(grid: Grid2D, order: int = 4, width: float = 1.0, center=(0.0, 0.0),
                      wavevector=(0.0, 0.0)) -> np.ndarray:
    """``(-Delta)**order`` applied to a (modulated) Gaussian, normalised to unit peak.

    The Fourier transform vanishes like ``|k|**(2 order)`` at the origin, so
    the field has vanishing moments up to order ``2 order - 1``.  The
    modulation is applied first so that the zero stays at ``k = 0``.
    """
    g = grid.gaussian(width, center) * np.exp(1j * (wavevector[0] * grid.X + wavevector[1] * grid.Y))
    f = apply_multiplier(g, grid.k2**order) if order else g
    return f / np.max(np.abs(f))


def verification_fields(grid: Grid2D, seed: int = 0, count: int = 3, order: int = 4) -> list[np.ndarray]:
    """Seeded Laguerre-Gaussian fields with small random centres and modulations."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        c = rng.uniform(-0.5, 0.5, size=2)
        kx, ky = rng.uniform(-0.5, 0.5, size=2)
        out.append(laguerre_gaussian(grid, order, 1.0, tuple(c), (kx, ky)))
    return out


# -- A(s) ---------------------------------------------------------------------


def _check_s_open(s):
    if not 0 < s < 2:
        raise DomainError(f"A(s) is considered for 0 < s < 2, got {s}")


def A_direct(op: SpectralOperator, s: float, f: np.ndarray, power=None) -> np.ndarray:
    """``s P f + S(P f) - P(S f)`` with ``P = (-Delta_V)**(s/2)``.

    ``power(s, g)`` defaults to the eigenbasis power for dense operators and
    to the exact multiplier for the free operator.
    """
    _check_s_open(s)
    if power is None:
        if op.mode == "dense":
            power = lambda s_, g: fractional_power_spectral(op, s_, g)  # noqa: E731
        else:
            power = lambda s_, g: fractional_power(op, s_, g)  # noqa: E731
    grid = op.grid
    Pf = power(s, f)
    return s * Pf + dilation_apply(grid, Pf) - power(s, dilation_apply(grid, f))


def A_integral(op: SpectralOperator, s: float, f: np.ndarray, W: np.ndarray,
               rule: QuadratureRule | None = None, method: str = "auto") -> np.ndarray:
    """``c(s) int_0^inf tau**(s/2) (tau+H)**-1 W (tau+H)**-1 f dtau`` by quadrature."""
    _check_s_open(s)
    W = np.asarray(W, dtype=float)
    if not np.any(W):
        return np.zeros_like(np.asarray(f, dtype=complex))
    if rule is None:
        rule = QuadratureRule.sandwich(op, s)
    # The sandwich rule starts too late for c(s)'s own tau**(s/2-1) integrand.
    c = c_of_s(s)
    acc = np.zeros_like(np.asarray(f, dtype=complex))
    for tau, w in zip(rule.nodes, rule.weights):
        inner_ = resolvent_apply(op, tau, f, method=method)
        acc += (w * tau ** (s / 2.0)) * resolvent_apply(op, tau, W * inner_, method=method)
    return c * acc


def commutator_defect_apply(op: SpectralOperator, W: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``D f = [S, H] f + 2 H f - W f``.

    Zero on R^2; on the periodic box ``S`` does not commute correctly with
    ``H`` near the boundary, and the resulting ``D`` is exactly the gap
    between the two A(s) routes:
    ``A_direct - A_integral = c(s) int tau**(s/2) R D R dtau``.
    """
    grid = op.grid
    Hf = op.apply(f)
    return dilation_apply(grid, Hf) - op.apply(dilation_apply(grid, f)) + 2.0 * Hf - W * f


def A_defect(op: SpectralOperator, s: float, f: np.ndarray, W: np.ndarray,
             rule: QuadratureRule | None = None, method: str = "auto") -> np.ndarray:
    """Resolvent sandwich of the periodic commutator defect (see ``commutator_defect_apply``)."""
    _check_s_open(s)
    if rule is None:
        rule = QuadratureRule.sandwich(op, s)
    # The sandwich rule starts too late for c(s)'s own tau**(s/2-1) integrand.
    c = c_of_s(s)
    W = np.asarray(W, dtype=float)
    acc = np.zeros_like(np.asarray(f, dtype=complex))
    for tau, w in zip(rule.nodes, rule.weights):
        inner_ = resolvent_apply(op, tau, f, method=method)
        acc += (w * tau ** (s / 2.0)) * resolvent_apply(op, tau, commutator_defect_apply(op, W, inner_), method=method)
    return c * acc


def sandwich_term(op: SpectralOperator, tau: float, f: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Single integrand ``R(tau) W R(tau) f``; linear in ``W`` for a fixed operator."""
    return resolvent_apply(op, tau, np.asarray(W) * resolvent_apply(op, tau, f))


# -- identity checks -----------------------------------------------------------


@dataclass
class CommutatorRow:
    identity_id: str
    s: float
    t: float
    n: int
    L: float
    residual: float
    kind: str
    order: float = float("nan")


def _centred(F, t, dt):
    return (F(t + dt) - F(t - dt)) / (2.0 * dt)


def _richardson_order(F, t, dt):
    """Observed order from centred differences at dt, dt/2, dt/4 (floor-free)."""
    d1, d2, d4 = (_centred(F, t, dt / m) for m in (1, 2, 4))
    a = np.linalg.norm(d1 - d2)
    b = np.linalg.norm(d2 - d4)
    # differences at rounding level carry no order information (F linear in t)
    floor = 1e3 * np.finfo(float).eps * np.linalg.norm(d1) * 4.0
    if b <= floor or a <= floor:
        return float("nan")
    return float(math.log2(a / b))


def _rel(grid, a, b, f):
    return float(l2_norm(grid, a - b) / l2_norm(grid, f))


def verify_appendix_identities(grid: Grid2D, t: float, f: np.ndarray, op: SpectralOperator | None = None,
                               s: float = 1.0, dt_fd: float | None = None) -> list[CommutatorRow]:
    """Residual ``||LHS f - RHS f|| / ||f||`` for each Galilei/commutator identity.

    Rows: six phase-multiplier commutators and ``power_commutator`` (needs ``op``).
    Time-derivative rows also report the observed finite-difference order.
    """
    if t < 1:
        raise DomainError("identities are evaluated for t >= 1")
    dt = dt_fd if dt_fd is not None else 1e-3 * t
    X2 = grid.r2
    S = lambda g: dilation_apply(grid, g)  # noqa: E731
    lap = lambda g: free_laplacian(grid, g)  # noqa: E731
    Mm = lambda tt: galilei_phase(grid, -tt)  # noqa: E731  M(-t)
    Mp = lambda tt: galilei_phase(grid, tt)  # noqa: E731   M(t)
    rows = []

    def row(ident, residual, kind, order=float("nan"), s_=0.0):
        rows.append(CommutatorRow(ident, s_, t, grid.n, grid.L, residual, kind, order))

    # [i d/dt, M(-t)] = |x|^2/(2t^2) M(-t)
    F = lambda tt: 1j * Mm(tt) * f  # noqa: E731
    row("dt_phase_minus", _rel(grid, _centred(F, t, dt), X2 / (2 * t**2) * Mm(t) * f, f), "time",
        _richardson_order(F, t, dt))
    # [i d/dt, M(t)] = -|x|^2/(2t^2) M(t)
    F = lambda tt: 1j * Mp(tt) * f  # noqa: E731
    row("dt_phase_plus", _rel(grid, _centred(F, t, dt), -X2 / (2 * t**2) * Mp(t) * f, f), "time",
        _richardson_order(F, t, dt))
    # [Delta, M(-t)] = M(-t)(in/t - |x|^2/t^2 + 2i x.grad/t)
    lhs = lap(Mm(t) * f) - Mm(t) * lap(f)
    rhs = Mm(t) * ((1j * DIM / t - X2 / t**2) * f + 2j * S(f) / t)
    row("laplacian_phase_minus", _rel(grid, lhs, rhs, f), "spatial")
    # [Delta, M(t)] = M(t)(-in/t - |x|^2/t^2 - 2i x.grad/t)
    lhs = lap(Mp(t) * f) - Mp(t) * lap(f)
    rhs = Mp(t) * ((-1j * DIM / t - X2 / t**2) * f - 2j * S(f) / t)
    row("laplacian_phase_plus", _rel(grid, lhs, rhs, f), "spatial")
    # [i d/dt + Delta/2, M(-t)] = (1/2) M(-t)(in/t + 2i x.grad/t)
    F = lambda tt: 1j * Mm(tt) * f  # noqa: E731
    lhs = _centred(F, t, dt) + 0.5 * (lap(Mm(t) * f) - Mm(t) * lap(f))
    rhs = 0.5 * Mm(t) * (1j * DIM / t * f + 2j * S(f) / t)
    row("schrodinger_phase_minus", _rel(grid, lhs, rhs, f), "time", _richardson_order(F, t, dt))
    # [i d/dt + Delta/2, M(t)] = M(t)(-in/(2t) - |x|^2/t^2 - i x.grad/t)
    F = lambda tt: 1j * Mp(tt) * f  # noqa: E731
    lhs = _centred(F, t, dt) + 0.5 * (lap(Mp(t) * f) - Mp(t) * lap(f))
    rhs = Mp(t) * ((-1j * DIM / (2 * t) - X2 / t**2) * f - 1j * S(f) / t)
    row("schrodinger_phase_plus", _rel(grid, lhs, rhs, f), "time", _richardson_order(F, t, dt))
    if op is not None:
        r, order = verify_power_commutator(op, s, t, f, dt)
        row("power_commutator", r, "time", order, s)
    return rows


def verify_power_commutator(op: SpectralOperator, s: float, t: float, f: np.ndarray, dt_fd: float | None = None):
    """``[i d/dt + Delta_V/2, (-t^2 Delta_V)^{s/2}] f = (is/t)(-t^2 Delta_V)^{s/2} f``.

    Returns ``(residual, observed_order)``.
    """
    dt = dt_fd if dt_fd is not None else 1e-3 * t
    grid = op.grid
    Pf = fractional_power(op, s, f)
    # (-t^2 Delta_V)^{s/2} f = t^s P f; Delta_V = -H commutes with P.
    F = lambda tt: 1j * tt**s * Pf  # noqa: E731
    comm = 0.5 * (-op.apply(t**s * Pf) + t**s * fractional_power(op, s, op.apply(f)))
    lhs = _centred(F, t, dt) + comm
    rhs = 1j * s / t * t**s * Pf
    return _rel(grid, lhs, rhs, f), _richardson_order(F, t, dt)


def verify_prop21(op: SpectralOperator, s: float, t: float, f: np.ndarray, dt_fd: float | None = None,
                  power=None, with_order: bool = False):
    """Residual of ``[i d/dt + Delta_V/2, |J_V|^s(t)] f = i t^{s-1} M(-t) A(s) M(t) f``.

    The time derivative of the full composition ``|J_V|^s(t) f`` is taken
    numerically.  With ``with_order`` the Richardson order of the difference
    quotient is returned alongside the residual.
    """
    dt = dt_fd if dt_fd is not None else 1e-3 * t
    grid = op.grid
    if s == 0:
        return (0.0, float("nan")) if with_order else 0.0
    if power is None:
        power = (lambda s_, g: fractional_power_spectral(op, s_, g)) if op.mode == "dense" \
            else (lambda s_, g: fractional_power(op, s_, g))

    def J(tt, g):
        m = galilei_phase(grid, tt)
        return tt**s * np.conj(m) * power(s, m * g)

    F = lambda tt: 1j * J(tt, f)  # noqa: E731
    # Delta_V = -H
    comm = 0.5 * (-op.apply(J(t, f)) + J(t, op.apply(f)))
    lhs = _centred(F, t, dt) + comm
    m = galilei_phase(grid, t)
    rhs = 1j * t ** (s - 1) * np.conj(m) * A_direct(op, s, m * f, power=power)
    res = _rel(grid, lhs, rhs, f)
    if with_order:
        return res, _richardson_order(F, t, dt)
    return res


@dataclass
class CommutatorReport:
    s: float
    residual_direct_vs_integral: float
    residual_prop21: float
    identities: list[CommutatorRow]

    def rows(self) -> list[CommutatorRow]:
        return list(self.identities)


def write_rows_csv(rows: list[CommutatorRow], path, append: bool = False) -> None:
    fields = ["identity_id", "s", "t", "n", "L", "residual"]
    exists = append and _nonempty(path)
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if not exists:
            w.writerow(fields)
        for r in rows:
            d = asdict(r)
            w.writerow([d["identity_id"], repr(d["s"]), repr(d["t"]), d["n"], repr(d["L"]), repr(d["residual"])])


def _nonempty(path) -> bool:
    import os

    return os.path.exists(path) and os.path.getsize(path) > 0
