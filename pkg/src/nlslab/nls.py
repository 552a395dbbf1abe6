"""Time stepping for ``i u_t + (1/2)(Delta - V) u = lambda |u|**(p-1) u`` from ``t = 1``,
the linear flow ``exp(i t Delta_V / 2)`` and the measurements built on them:
sup-norm decay fits, scattering tails, Strichartz and dispersive ratios and
the X_T diagnostic norm.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, DomainError, NumericError
from .grid import Grid2D, apply_multiplier, l2_norm, lp_norm, to_spectral
from .operators import SpectralOperator, apply_J_free, apply_JV, build_operator
from .potentials import PotentialSpec, sample_potential

T_START = 1.0


@dataclass(frozen=True)
class NLSConfig:
    p: float = 3.0
    lam: complex = 1.0
    epsilon: float = 0.05
    profile: str = "gaussian"  # gaussian | bandlimited
    profile_width: float = 1.0
    alpha: float = 1.5
    n: int = 256
    L: float = 64.0
    potential: PotentialSpec = field(default_factory=lambda: PotentialSpec.gaussian_bump(1.0, 1.0))
    t_start: float = T_START
    t_end: float = 40.0
    dt: float = 0.01
    sample_dt: float = 0.5
    store_fields: bool = True
    seed: int = 0

    def __post_init__(self):
        errors = validate_nls_parameters(self.p, complex(self.lam), self.dt, self.alpha, self.t_start, self.t_end)
        if self.epsilon < 0:
            errors.append("epsilon must be >= 0")
        if self.profile not in ("gaussian", "bandlimited"):
            errors.append(f"unknown profile {self.profile!r}")
        if self.sample_dt < self.dt:
            errors.append("sample_dt must be >= dt")
        if errors:
            raise ConfigurationError("; ".join(errors))
        object.__setattr__(self, "lam", complex(self.lam))

    @property
    def grid(self) -> Grid2D:
        return Grid2D(self.n, self.L)


def validate_nls_parameters(p, lam, dt, alpha, t_start=T_START, t_end=None) -> list[str]:
    errors = []
    if not p > 2:
        errors.append(f"p must exceed 2 (p > 2), got {p}")
    if complex(lam).imag > 0:
        errors.append(f"Im lambda must satisfy Imλ ≤ 0, got {complex(lam).imag}")
    if not dt > 0:
        errors.append(f"dt must be positive, got {dt}")
    if not 1 < alpha < 2:
        errors.append(f"alpha must lie in (1, 2), got {alpha}")
    if t_start != T_START:
        errors.append(f"t_start must be 1 (data are given at t = 1), got {t_start}")
    if t_end is not None and not t_end > t_start:
        errors.append("t_end must exceed t_start")
    return errors


def initial_profile(config: NLSConfig, grid: Grid2D | None = None) -> np.ndarray:
    """``epsilon`` times a unit-peak Gaussian, or a normalised random band-limited field."""
    grid = grid or config.grid
    if config.profile == "gaussian":
        return config.epsilon * grid.gaussian(config.profile_width)
    from .fields import random_bandlimited_fields

    f = random_bandlimited_fields(grid, 1, config.seed, envelope=config.profile_width)[0]
    return config.epsilon * f / np.max(np.abs(f))


# -- wrap horizon ---------------------------------------------------------------


def energy_bandwidth(grid: Grid2D, f: np.ndarray, fraction: float = 0.99) -> float:
    """Smallest ``k`` with ``fraction`` of the spectral energy of ``f`` inside ``|k| <= k``."""
    e = np.abs(to_spectral(grid, f)).ravel() ** 2
    k = grid.kabs.ravel()
    order = np.argsort(k)
    cum = np.cumsum(e[order])
    idx = int(np.searchsorted(cum, fraction * cum[-1]))
    return float(k[order][min(idx, len(k) - 1)])


def wrap_horizon(grid: Grid2D, f: np.ndarray, fraction: float = 0.99) -> float:
    """Time for the 99%-energy front to reach the box edge, ``L / k99``.

    Under ``exp(i t Delta / 2)`` a component of wavenumber ``k`` moves at speed
    ``|k|``.  Past this time the fast fronts of neighbouring images overlap the
    outgoing ring where the sup norm sits, so it is a conservative bound.
    """
    kb = energy_bandwidth(grid, f, fraction)
    return math.inf if kb == 0 else grid.L / kb


# -- propagators ------------------------------------------------------------------


def nonlinear_phase_step(u: np.ndarray, dt: float, lam: complex, p: float) -> np.ndarray:
    """Exact pointwise solution of ``i u_t = lambda |u|**(p-1) u`` over ``dt``."""
    if not p > 2:
        raise DomainError(f"p must exceed 2, got {p}")
    lam = complex(lam)
    lr, li = lam.real, lam.imag
    a = np.abs(u) ** (p - 1.0)
    x = -(p - 1.0) * li * a * dt  # >= 0 when Im lambda <= 0
    small = np.abs(x) < 1e-8
    xs = np.where(small, 1.0, x)
    phi = np.where(small, 1.0 - 0.5 * x, np.log1p(xs) / xs)  # log(1+x)/x
    amp = np.where(small, 1.0 - x / (p - 1.0), (1.0 + xs) ** (-1.0 / (p - 1.0)))
    return u * amp * np.exp(-1j * lr * a * dt * phi)


class SplitStepper:
    """Strang splitting: half (potential + nonlinear), full kinetic by FFT, half again."""

    def __init__(self, grid: Grid2D, V: np.ndarray, dt: float, lam: complex = 0.0, p: float = 3.0):
        self.grid = grid
        self.dt = dt
        self.lam = complex(lam)
        self.p = p
        self.kin = np.exp(-0.5j * dt * grid.k2)
        V = np.asarray(V, dtype=float)
        self.half_pot = None if not np.any(V) else np.exp(-0.25j * dt * V)

    def _half(self, u):
        if self.half_pot is not None:
            u = self.half_pot * u
        if self.lam != 0:
            u = nonlinear_phase_step(u, 0.5 * self.dt, self.lam, self.p)
        return u

    def step(self, u: np.ndarray) -> np.ndarray:
        u = self._half(u)
        u = sfft.ifft2(self.kin * sfft.fft2(u, axes=(-2, -1)), axes=(-2, -1))
        return self._half(u)


def _n_steps(span: float, dt: float) -> int:
    return max(1, int(round(abs(span) / dt)))


def linear_propagate(op: SpectralOperator, t0: float, t1: float, f: np.ndarray, method: str = "auto",
                     dt: float | None = None) -> np.ndarray:
    """``exp(i (t1 - t0) Delta_V / 2) f``.

    ``"eigen"``: phase rotation in the eigenbasis (dense mode); the free
    operator always uses the exact FFT multiplier.  ``"split"``: Strang
    splitting with step ``dt`` (default 0.01), for grids too large for dense mode.
    """
    tau = t1 - t0
    f = np.asarray(f, dtype=complex)
    if tau == 0:
        return f.copy()
    if op.is_free:
        return apply_multiplier(f, np.exp(-0.5j * tau * op.grid.k2))
    if method == "auto":
        method = "eigen" if op.mode == "dense" else "split"
    if method == "eigen":
        return op.apply_function(lambda mu: np.exp(-0.5j * tau * mu), f)
    if method != "split":
        raise DomainError(f"unknown propagation method {method!r}")
    dt = dt or 0.01
    m = _n_steps(tau, dt)
    stepper = SplitStepper(op.grid, op.V, tau / m)
    u = f
    for _ in range(m):
        u = stepper.step(u)
    return u


# -- solver ----------------------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    linf: np.ndarray
    l2: np.ndarray
    xt_partial: np.ndarray
    fields: np.ndarray | None
    config: NLSConfig
    dt: float

    def __post_init__(self):
        for name in ("times", "linf", "l2", "xt_partial", "fields"):
            a = getattr(self, name)
            if a is not None:
                a.setflags(write=False)

    @property
    def epsilon(self) -> float:
        return self.config.epsilon

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "linf_norm", "l2_norm", "xt_partial"])
            for row in zip(self.times, self.linf, self.l2, self.xt_partial):
                w.writerow([repr(float(v)) for v in row])


def solve_nls(config: NLSConfig, u0: np.ndarray | None = None, op: SpectralOperator | None = None) -> Trajectory:
    """Strang split-step run from ``t = 1`` to ``t_end``, sampling every ``sample_dt``.

    ``xt_partial`` is the running ``sup ||J|^alpha u||_2 + sup ||u||_2`` with the
    free ``|J|^alpha`` (FFT); see :func:`xt_norm` for the ``|J_V|`` version.
    Raises :class:`NumericError` with the offending time if the field stops being finite.
    """
    grid = config.grid
    V = sample_potential(config.potential, grid) if op is None else op.V
    u = initial_profile(config, grid) if u0 is None else np.array(u0, dtype=complex)
    if u.shape != (grid.n, grid.n):
        raise ConfigurationError(f"initial field shape {u.shape} does not match n={grid.n}")
    total = config.t_end - config.t_start
    n_steps = _n_steps(total, config.dt)
    dt = total / n_steps
    every = max(1, int(round(config.sample_dt / dt)))
    stepper = SplitStepper(grid, V, dt, config.lam, config.p)

    times, linf, l2, xt, snaps = [], [], [], [], []
    sup_j = sup_l2 = 0.0

    def record(t, u):
        nonlocal sup_j, sup_l2
        times.append(t)
        linf.append(float(np.max(np.abs(u))))
        l2.append(float(l2_norm(grid, u)))
        sup_j = max(sup_j, float(l2_norm(grid, apply_J_free(grid, t, config.alpha, u))))
        sup_l2 = max(sup_l2, l2[-1])
        xt.append(sup_j + sup_l2)
        if config.store_fields:
            snaps.append(u.copy())

    record(config.t_start, u)
    for j in range(1, n_steps + 1):
        u = stepper.step(u)
        t = config.t_start + j * dt
        if j % every == 0 or j == n_steps:
            if not np.all(np.isfinite(u)):
                raise NumericError(f"non-finite field at t = {t:.6g}", time=t)
            record(t, u)
    return Trajectory(np.array(times), np.array(linf), np.array(l2), np.array(xt),
                      np.array(snaps) if snaps else None, config, dt)


def build_nls_operator(config: NLSConfig) -> SpectralOperator:
    mode = "dense" if config.n <= 32 else "matrix-free"
    return build_operator(config.grid, config.potential, mode)


# -- decay -------------------------------------------------------------------------------


@dataclass
class DecayFit:
    gamma: float
    C0: float
    window: tuple
    samples: int
    warning: str | None = None
    epsilon: float = 1.0

    @property
    def C0_over_epsilon(self) -> float:
        return self.C0 / self.epsilon if self.epsilon else math.inf


def measure_decay(traj: Trajectory, window: tuple | None = None) -> DecayFit:
    """Least-squares fit ``log ||u||_inf = log C0 - gamma log t`` over ``window``.

    Ordinary least squares on the (uniform in ``t``) samples, so late times,
    where the asymptotic rate applies, carry most of the weight.
    """
    t = traj.times
    lo, hi = window if window is not None else (t[0], t[-1])
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < 3:
        raise DomainError(f"decay window {window} holds fewer than 3 samples")
    lt = np.log(t[sel])
    ly = np.log(traj.linf[sel])
    A = np.column_stack([np.ones_like(lt), lt])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    warn = None
    if hi / lo < 10:
        warn = f"decay window [{lo:g}, {hi:g}] spans less than a decade"
        warnings.warn(warn, stacklevel=2)
    return DecayFit(float(-coef[1]), float(math.exp(coef[0])), (float(lo), float(hi)), int(sel.sum()), warn,
                    traj.epsilon)


def epsilon_scan(config: NLSConfig, epsilons, window: tuple | None = None,
                 gamma_range: tuple = (0.85, 1.15)) -> tuple[list, float | None]:
    """Decay fits for each data amplitude; returns ``(fits, largest epsilon in range)``.

    How small the data must be is not quantified, so the largest amplitude
    whose fitted rate stays inside ``gamma_range`` is reported instead.
    """
    fits = []
    for eps in sorted(float(e) for e in epsilons):
        traj = solve_nls(replace(config, epsilon=eps, store_fields=False))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fits.append(measure_decay(traj, window))
    ok = [f.epsilon for f in fits if gamma_range[0] <= f.gamma <= gamma_range[1]]
    return fits, (max(ok) if ok else None)


# -- scattering -----------------------------------------------------------------------------


@dataclass
class ScatteringResult:
    times: np.ndarray
    tails: np.ndarray  # ||w(T_{j+1}) - w(T_j)||_2
    u_plus: np.ndarray | None
    converged: bool
    flag: str


def scattering_increment(op: SpectralOperator, t0: float, t1: float, u0: np.ndarray, u1: np.ndarray,
                         method: str = "auto", dt: float | None = None) -> float:
    """``||w(t1) - w(t0)||_2 = ||u(t1) - U(t1 - t0) u(t0)||_2`` (the flow is unitary)."""
    return float(l2_norm(op.grid, u1 - linear_propagate(op, t0, t1, u0, method, dt)))


def extract_scattering_state(traj: Trajectory, op: SpectralOperator, times=None, method: str = "auto",
                             final_state: bool = True) -> ScatteringResult:
    """Cauchy table of ``w(T) = exp(-i T Delta_V / 2) u(T)`` at ``times`` (default: all samples).

    Uses the solver's step for split-step propagation so that the linear part
    of the nonlinear run and the back-propagation share the same splitting.
    """
    if traj.fields is None:
        raise DomainError("scattering extraction needs a trajectory with stored fields")
    ts = traj.times if times is None else np.asarray(times, dtype=float)
    idx = [int(np.argmin(np.abs(traj.times - T))) for T in ts]
    if any(abs(traj.times[i] - T) > 1e-9 for i, T in zip(idx, ts)):
        raise DomainError("scattering times must be trajectory sample times")
    tails = np.array([
        scattering_increment(op, traj.times[a], traj.times[b], traj.fields[a], traj.fields[b], method, traj.dt)
        for a, b in zip(idx[:-1], idx[1:])
    ])
    decreasing = bool(np.all(np.diff(tails) < 0))
    u_plus = None
    if final_state:
        T = traj.times[idx[-1]]
        u_plus = linear_propagate(op, T, 0.0, traj.fields[idx[-1]], method, traj.dt)
    return ScatteringResult(ts, tails, u_plus, decreasing, "converged" if decreasing else "not converged")


# -- Strichartz and dispersive ratios ------------------------------------------------------------


def check_admissible(p_exp: float, q_exp: float) -> None:
    """Two-dimensional admissibility ``1/p + 1/q = 1/2`` with ``(p, q) != (2, inf)``."""
    if p_exp == 2 and np.isinf(q_exp):
        raise DomainError("(p, q) = (2, inf) is excluded: admissible pairs need 1/p + 1/q = 1/2, (p,q) ≠ (2,∞)")
    if not (p_exp >= 2 and q_exp >= 2):
        raise DomainError(f"admissible pairs need p, q >= 2; got ({p_exp}, {q_exp})")
    s = (0.0 if np.isinf(p_exp) else 1.0 / p_exp) + (0.0 if np.isinf(q_exp) else 1.0 / q_exp)
    if abs(s - 0.5) > 1e-12:
        raise DomainError(f"admissible pairs need 1/p + 1/q = 1/2; got 1/{p_exp} + 1/{q_exp} = {s:g}")


def strichartz_norm(op: SpectralOperator, f: np.ndarray, p_exp: float, q_exp: float, T: float, dt: float,
                    method: str = "auto") -> np.ndarray:
    """``|| exp(i t Delta_V / 2) f ||_{L^p([0,T]; L^q)}`` by the trapezoid rule; returns per-field values.

    ``f`` may be a stack of fields.  Time samples are spaced by ``dt`` and the
    flow advances by the same steps.
    """
    check_admissible(p_exp, q_exp)
    grid = op.grid
    f = np.asarray(f, dtype=complex)
    m = _n_steps(T, dt)
    h = T / m
    if op.is_free:
        prop = lambda u: apply_multiplier(u, np.exp(-0.5j * h * grid.k2))  # noqa: E731
    elif method == "eigen" or (method == "auto" and op.mode == "dense"):
        prop = lambda u: op.apply_function(lambda mu: np.exp(-0.5j * h * mu), u)  # noqa: E731
    else:
        stepper = SplitStepper(grid, op.V, h)
        prop = stepper.step
    u = f
    vals = [lp_norm(grid, u, q_exp)]
    for _ in range(m):
        u = prop(u)
        vals.append(lp_norm(grid, u, q_exp))
    vals = np.array(vals)
    if np.isinf(p_exp):
        return vals.max(axis=0)
    w = np.full(m + 1, h)
    w[0] = w[-1] = 0.5 * h
    return np.tensordot(w, vals**p_exp, axes=(0, 0)) ** (1.0 / p_exp)


def strichartz_ratio(op: SpectralOperator, f: np.ndarray, p_exp: float, q_exp: float, T: float, dt: float,
                     method: str = "auto") -> np.ndarray:
    return strichartz_norm(op, f, p_exp, q_exp, T, dt, method) / l2_norm(op.grid, np.asarray(f, dtype=complex))


def dispersive_ratio(op: SpectralOperator, f: np.ndarray, times, method: str = "auto",
                     dt: float | None = None) -> np.ndarray:
    """``t ||exp(i t Delta_V / 2) f||_inf / ||f||_1`` for each ``t`` (propagating from 0)."""
    grid = op.grid
    f = np.asarray(f, dtype=complex)
    l1 = lp_norm(grid, f, 1)
    out = []
    t_prev, u = 0.0, f
    for t in sorted(times):
        u = linear_propagate(op, t_prev, t, u, method, dt)
        t_prev = t
        out.append(t * np.max(np.abs(u)) / l1)
    return np.array(out)


# -- X_T ----------------------------------------------------------------------------------------


def xt_norm(traj: Trajectory, op: SpectralOperator | None, alpha: float) -> float:
    """``sup_t || |J_V|^alpha(t) u(t) ||_2 + sup_t ||u(t)||_2`` over the stored samples.

    Uses ``|J_V|`` through ``op`` when given (dense mode for exactness),
    otherwise the free ``|J|``.
    """
    if not 1 < alpha < 2:
        raise DomainError(f"alpha must lie in (1, 2), got {alpha}")
    if traj.fields is None:
        raise DomainError("xt_norm needs a trajectory with stored fields")
    grid = traj.config.grid
    js = []
    for t, u in zip(traj.times, traj.fields):
        Ju = apply_JV(op, t, alpha, u) if op is not None else apply_J_free(grid, t, alpha, u)
        js.append(float(l2_norm(grid, Ju)))
    return max(js) + float(np.max(traj.l2))
