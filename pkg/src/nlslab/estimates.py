"""Empirical checks of the linear estimates: resolvent and Bessel bounds, heat
kernel domination, the A(s) bound, equivalence and interpolation surveys,
and the zero-energy regular-point test.

Every survey returns a :class:`RatioSurvey`; the CSV it writes starts with a
``#`` metadata line (seed, grid, parameters) followed by a header row.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy import integrate

from .bessel import bessel_k0, kernel_lm_norm, kernel_scaling_slope  # noqa: F401  (re-exported)
from .commutators import A_integral
from .errors import DomainError, NumericError, PreconditionError
from .grid import BracketWeight, Grid2D, free_fractional_laplacian, l2_norm, lp_norm
from .operators import (
    QuadratureRule,
    SpectralOperator,
    c_of_s,
    fractional_power,
    heat_kernel_matrix,
    lanczos_quadratic_form,
    resolvent_apply,
)
from .potentials import PotentialSpec, sample_potential


@dataclass
class RatioSurvey:
    estimate_id: str
    params: dict
    sample_ids: list
    ratios: np.ndarray
    xs: np.ndarray | None = None  # tau, t or s per sample, when meaningful
    n: int | None = None
    L: float | None = None
    seed: int | None = None
    skipped: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ratios = np.asarray(self.ratios, dtype=float)
        if self.xs is not None:
            self.xs = np.asarray(self.xs, dtype=float)
        if len(self.sample_ids) != len(self.ratios):
            raise ValueError("one ratio per sample id")
        if not np.all(np.isfinite(self.ratios)):
            raise NumericError(f"{self.estimate_id}: non-finite ratio recorded")

    @property
    def count(self) -> int:
        return len(self.ratios)

    @property
    def sup_ratio(self) -> float:
        return float(np.max(self.ratios)) if self.count else 0.0

    @property
    def min_ratio(self) -> float:
        return float(np.min(self.ratios)) if self.count else 0.0

    def breakdown(self) -> dict:
        """Sup ratio per decade of ``xs`` (``floor(log10 x)``), or per distinct ``x`` if requested."""
        if self.xs is None:
            return {}
        out = {}
        for x, r in zip(self.xs, self.ratios):
            key = int(math.floor(math.log10(x))) if x > 0 else None
            out[key] = max(out.get(key, -np.inf), r)
        return out

    def sup_by_x(self) -> dict:
        if self.xs is None:
            return {}
        return {float(x): float(np.max(self.ratios[self.xs == x])) for x in np.unique(self.xs)}

    def header(self) -> str:
        meta = {"estimate": self.estimate_id, "seed": self.seed, "n": self.n, "L": self.L,
                "params": self.params, "samples": self.count, "skipped": self.skipped,
                "sup_ratio": self.sup_ratio}
        return "# " + json.dumps(meta, sort_keys=True, default=float)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.header() + "\n")
            w = csv.writer(fh)
            w.writerow(["sample_id", "x", "ratio"])
            xs = self.xs if self.xs is not None else [""] * self.count
            for sid, x, r in zip(self.sample_ids, xs, self.ratios):
                w.writerow([sid, "" if x == "" else repr(float(x)), repr(float(r))])


def _drift(values) -> float:
    """Relative spread ``(max - min) / min`` of positive values."""
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / v.min())


# -- free resolvent ------------------------------------------------------------


def resolvent_wrap_ok(tau: float, L: float, tol: float = 1e-3) -> bool:
    """The free resolvent kernel ``K0(sqrt(tau) r)`` has decayed below ``tol`` at distance ``L``."""
    return math.exp(-math.sqrt(tau) * L) < tol


def survey_free_resolvent(grid: Grid2D, q: float, s0: float, taus, fields, variant: str = "plain",
                          a: float | None = None, field_ids=None, seed: int | None = None,
                          wrap_tol: float = 1e-3) -> RatioSurvey:
    """Ratios ``tau**s0 ||LHS||_q / ||f||_rhs`` for the three free resolvent bounds.

    ``variant``: ``"plain"`` (``(tau-Delta)**-1 f`` against ``||f||_k``,
    ``1/k = 1/q + 1 - s0``), ``"weight_inside"`` (``(tau-Delta)**-1 <x>**-a f``)
    or ``"weight_outside"`` (``<x>**-a (tau-Delta)**-1 f``), both against ``||f||_q``.
    Values of ``tau`` whose kernel still reaches across the box are skipped.
    """
    if not 1 < q < np.inf:
        raise DomainError(f"need 1 < q < inf, got q={q}")
    if not 0 < s0 <= 1:
        raise DomainError(f"need 0 < s0 <= 1, got s0={s0}")
    inv_k = 1.0 / q + 1.0 - s0
    if variant == "plain":
        if not 0 < inv_k <= 1:
            raise DomainError(f"1/k = 1/q + 1 - s0 = {inv_k:g} must lie in (0, 1]")
        k = 1.0 / inv_k
    elif variant in ("weight_inside", "weight_outside"):
        if a is None or not a > 2.0 * (1.0 - s0):
            raise DomainError(f"weighted bounds need a > 2(1 - s0) = {2 * (1 - s0):g}, got a={a}")
        k = q
    else:
        raise DomainError(f"unknown variant {variant!r}")
    fields = np.asarray(fields, dtype=complex)
    if fields.ndim == 2:
        fields = fields[None]
    ids = list(field_ids) if field_ids is not None else [f"f{j}" for j in range(len(fields))]
    wt = BracketWeight(-a).sample(grid) if a is not None else None
    sample_ids, xs, ratios = [], [], []
    skipped = 0
    for tau in taus:
        if not resolvent_wrap_ok(tau, grid.L, wrap_tol):
            skipped += len(fields)
            continue
        rhs_in = fields * wt if variant == "weight_inside" else fields
        u = sfft.ifft2(sfft.fft2(rhs_in, axes=(-2, -1)) / (tau + grid.k2), axes=(-2, -1))
        if variant == "weight_outside":
            u = wt * u
        num = lp_norm(grid, u, q) * tau**s0
        den = lp_norm(grid, fields, k)
        for fid, nv, dv in zip(ids, num, den):
            if dv == 0:
                skipped += 1
                continue
            sample_ids.append(f"{fid}@tau={tau:g}")
            xs.append(tau)
            ratios.append(nv / dv)
    params = {"q": q, "s0": s0, "k": k, "variant": variant}
    if a is not None:
        params["a"] = a
    return RatioSurvey("free_resolvent", params, sample_ids, ratios, xs, grid.n, grid.L, seed, skipped)


# -- heat kernel domination ------------------------------------------------------


def periodized_gaussian_kernel(grid: Grid2D, t: float, beta: float = 1.0, images: int = 2) -> np.ndarray:
    """``(4 pi beta t)**-1 exp(-|x - y|**2 / (4 beta t))`` summed over periodic images, on node pairs."""
    x = grid.x
    d = x[:, None] - x[None, :]
    g1 = np.zeros_like(d)
    for m in range(-images, images + 1):
        g1 += np.exp(-((d + 2.0 * grid.L * m) ** 2) / (4.0 * beta * t))
    # Separable: the 2D kernel is the product of the 1D image sums.
    n = grid.n
    G = np.einsum("ac,bd->abcd", g1, g1).reshape(n * n, n * n)
    return G / (4.0 * np.pi * beta * t)


def heat_window(grid: Grid2D) -> tuple[float, float]:
    """Times where the kernel is resolved (width >= 2h) and narrower than a quarter box."""
    return 2.0 * grid.h**2, (grid.L / 4.0) ** 2


@dataclass
class HeatDominationCertificate:
    beta: float | None
    C: float | None
    times: list
    fraction_ok: float
    min_entry: float
    rows: list  # (t, beta, C_beta, fraction_ok)
    C_max: float
    abs_floor: float

    @property
    def certified(self) -> bool:
        return self.beta is not None

    @property
    def nonnegative(self) -> bool:
        return self.min_entry >= -self.abs_floor


def check_heat_domination(op: SpectralOperator, times, betas=(1.0, 1.25, 1.5, 2.0, 3.0, 4.0),
                          C_max: float = 1.05, abs_floor: float = 1e-10) -> HeatDominationCertificate:
    """Search the smallest ``beta`` with ``K_V(t) <= C (4 pi beta t)**-1 exp(-|x-y|**2/(4 beta t))``.

    ``K_V`` is the dense heat kernel; the Gaussian is periodized to match the
    box.  An entry passes if ``K_V <= C G + abs_floor`` (the floor absorbs
    rounding in entries that are both zero to machine precision).
    """
    grid = op.grid
    V = op.V
    if np.min(V) < 0:
        raise PreconditionError("heat domination is checked for V >= 0")
    lo, hi = heat_window(grid)
    times = [float(t) for t in times]
    for t in times:
        if not lo <= t <= hi:
            warnings.warn(f"t={t} lies outside the resolved no-wrap window [{lo:.3g}, {hi:.3g}]", stacklevel=2)
    kernels = [heat_kernel_matrix(op, t) for t in times]
    min_entry = float(min(K.min() for K in kernels))
    rows = []
    chosen = None
    for beta in sorted(betas):
        if beta < 1:
            continue
        Cs, fracs = [], []
        for t, K in zip(times, kernels):
            G = periodized_gaussian_kernel(grid, t, beta)
            big = G > abs_floor
            Cs.append(float(np.max(K[big] / G[big])))
            fracs.append(float(np.mean(K <= C_max * G + abs_floor)))
            rows.append((t, beta, Cs[-1], fracs[-1]))
        if chosen is None and max(Cs) <= C_max:
            chosen = (beta, max(Cs))
    # fraction of entries satisfying the beta = 1 certificate at C_max
    frac1 = min(r[3] for r in rows if r[1] == min(b for b in betas if b >= 1))
    return HeatDominationCertificate(chosen[0] if chosen else None, chosen[1] if chosen else None,
                                     times, frac1, min_entry, rows, C_max, abs_floor)


# -- A(s) bound ------------------------------------------------------------------


def _dual(q: float) -> float:
    return np.inf if q == 1 else q / (q - 1.0)


def survey_As_bound(op: SpectralOperator, s: float, q: float, fields, W, variant: str = "dual",
                    field_ids=None, seed: int | None = None, method: str = "auto") -> RatioSurvey:
    """``||A(s) f||_q / ||f||_{q'}`` (``variant="dual"``) or ``/ ||f||_q`` (``"same"``), A via the sandwich."""
    if not 1 < s < 2:
        raise DomainError(f"the A(s) bound needs 1 < s < 2, got {s}")
    if not 1 <= q <= 2:
        raise DomainError(f"the A(s) bound needs 1 <= q <= 2, got {q}")
    grid = op.grid
    fields = np.asarray(fields, dtype=complex)
    if fields.ndim == 2:
        fields = fields[None]
    ids = list(field_ids) if field_ids is not None else [f"f{j}" for j in range(len(fields))]
    Af = A_integral(op, s, fields, W, method=method)
    rq = _dual(q) if variant == "dual" else q
    num = lp_norm(grid, Af, q)
    den = lp_norm(grid, fields, rq)
    keep = den > 0
    return RatioSurvey("As_bound", {"s": s, "q": q, "variant": variant},
                       [i for i, k in zip(ids, keep) if k], num[keep] / den[keep], None,
                       grid.n, grid.L, seed, int(np.sum(~keep)))


# -- equivalence ------------------------------------------------------------------


def power_norms_squared(op: SpectralOperator, s_values, fields, method: str = "auto", steps: int = 200):
    """``||(-Delta_V)**(s/2) f||**2`` for each ``s`` and field; shape ``(len(s_values), nfields)``.

    ``"dense"``: eigenbasis; ``"lanczos"``: Gauss quadrature of ``<f, H**s f>``
    (all ``s`` from one Lanczos sweep); ``"auto"`` picks dense when available.
    """
    fields = np.asarray(fields, dtype=complex)
    if method == "auto":
        method = "dense" if (op.mode == "dense" or op.is_free) else "lanczos"
    if method == "dense":
        return np.array([l2_norm(op.grid, fractional_power(op, s, fields)) ** 2 for s in s_values])
    if method == "lanczos":
        fns = [(lambda m, s=s: np.where(m > 0, m, 0.0) ** s) if s > 0 else (lambda m: np.ones_like(m))
               for s in s_values]
        return lanczos_quadratic_form(op, fns, fields, steps)
    raise DomainError(f"unknown method {method!r}")


def survey_equivalence(op: SpectralOperator, s_values, fields, two_sided: bool = True,
                       field_ids=None, seed: int | None = None, method: str = "auto") -> RatioSurvey:
    """Ratios ``||(-Delta_V)**(s/2) f|| / ||(-Delta)**(s/2) f||`` for every ``(s, field)``.

    Zero-denominator fields are skipped and counted.  ``xs`` holds ``s``.
    """
    for s in s_values:
        if two_sided and not 0 <= s < 1:
            raise DomainError(f"the two-sided equivalence holds for 0 <= s < 1, got {s}")
        if not 0 <= s <= 2:
            raise DomainError(f"the one-sided bound is surveyed for s in [0, 2], got {s}")
    grid = op.grid
    fields = np.asarray(fields, dtype=complex)
    if fields.ndim == 2:
        fields = fields[None]
    ids = list(field_ids) if field_ids is not None else [f"f{j}" for j in range(len(fields))]
    numsq = power_norms_squared(op, s_values, fields, method)
    sample_ids, xs, ratios = [], [], []
    skipped = 0
    for i, s in enumerate(s_values):
        den = l2_norm(grid, free_fractional_laplacian(grid, fields, s))
        for fid, nsq, d in zip(ids, numsq[i], den):
            if d <= 1e-14 * l2_norm(grid, fields).max():
                skipped += 1
                continue
            sample_ids.append(f"{fid}@s={s:g}")
            xs.append(s)
            ratios.append(math.sqrt(max(nsq, 0.0)) / d)
    return RatioSurvey("equivalence", {"s_values": list(map(float, s_values)), "two_sided": two_sided},
                       sample_ids, ratios, xs, grid.n, grid.L, seed, skipped)


# -- difference bound ----------------------------------------------------------------


def difference_direct(op: SpectralOperator, s: float, f: np.ndarray) -> np.ndarray:
    """``(-Delta_V)**(s/2) f - (-Delta)**(s/2) f`` from two fractional powers."""
    return fractional_power(op, s, f) - free_fractional_laplacian(op.grid, f, s)


def difference_integral(op: SpectralOperator, s: float, f: np.ndarray, rule: QuadratureRule | None = None,
                        method: str = "auto") -> np.ndarray:
    """``c(s) int tau**(s/2) (tau-Delta_V)**-1 V (tau-Delta)**-1 f dtau`` by quadrature."""
    if not 0 < s < 2:
        raise DomainError(f"the difference identity holds for 0 < s < 2, got {s}")
    grid = op.grid
    f = np.asarray(f, dtype=complex)
    if op.is_free:
        return np.zeros_like(f)
    if rule is None:
        lo, hi = op.spectral_bounds
        lo = min(lo, grid.dk**2)
        # integrand ~ tau**(s/2 - 1) at small tau (free zero mode), tau**(s/2 - 2) at large tau
        rule = QuadratureRule.for_spectrum(lo, hi, s / 2.0, 1.0 - s / 2.0, n_nodes=200)
    c = c_of_s(s)
    F = sfft.fft2(f, axes=(-2, -1))
    acc = np.zeros_like(f)
    for tau, w in zip(rule.nodes, rule.weights):
        r0 = sfft.ifft2(F / (tau + grid.k2), axes=(-2, -1))
        acc += (w * tau ** (s / 2.0)) * resolvent_apply(op, tau, op.V * r0, method=method)
    return c * acc


def check_difference_bound(op: SpectralOperator, s: float, sigma: float, fields, field_ids=None,
                           seed: int | None = None, cross_check: bool = True) -> RatioSurvey:
    """``||P_V f - P_0 f|| / (||P_0 f||**(sigma/s) ||f||**(1 - sigma/s))`` with ``P = (.)**(s/2)``.

    With ``cross_check`` the difference is also evaluated by the resolvent
    integral and the worst relative route gap is stored in ``extra["route_gap"]``.
    """
    if not 1 <= s < 2:
        raise DomainError(f"the difference bound needs 1 <= s < 2, got {s}")
    if not 0 < sigma < 1:
        raise DomainError(f"the difference bound needs 0 < sigma < 1, got {sigma}")
    grid = op.grid
    fields = np.asarray(fields, dtype=complex)
    if fields.ndim == 2:
        fields = fields[None]
    ids = list(field_ids) if field_ids is not None else [f"f{j}" for j in range(len(fields))]
    diff = difference_direct(op, s, fields)
    lhs = l2_norm(grid, diff)
    p0 = l2_norm(grid, free_fractional_laplacian(grid, fields, s))
    f2 = l2_norm(grid, fields)
    rhs = p0 ** (sigma / s) * f2 ** (1.0 - sigma / s)
    keep = rhs > 0
    extra = {}
    if cross_check and not op.is_free:
        alt = difference_integral(op, s, fields)
        gap = l2_norm(grid, alt - diff) / np.where(lhs > 0, lhs, 1.0)
        extra["route_gap"] = float(np.max(gap))
    return RatioSurvey("difference_bound", {"s": s, "sigma": sigma},
                       [i for i, k in zip(ids, keep) if k], lhs[keep] / rhs[keep], None,
                       grid.n, grid.L, seed, int(np.sum(~keep)), extra)


# -- L-infinity interpolation ----------------------------------------------------------


def optimizing_tau(s: float, free_norm: float, l2: float) -> float:
    """Frequency cut that balances the two terms of the Fourier-side bound."""
    return (math.sqrt(1.0 / (2.0 * (s - 1.0))) * free_norm) ** (1.0 / s) * l2 ** (-1.0 / s)


def two_term_gap(s: float, free_norm: float, l2: float) -> float:
    """Relative gap between ``tau ||f||`` and ``sqrt(1/(2(s-1))) tau**(1-s) ||(-Delta)**(s/2) f||`` at the optimum."""
    tau = optimizing_tau(s, free_norm, l2)
    t1 = tau * l2
    t2 = math.sqrt(1.0 / (2.0 * (s - 1.0))) * tau ** (1.0 - s) * free_norm
    return abs(t1 - t2) / max(abs(t1), abs(t2))


def check_linf_interpolation(op: SpectralOperator, s: float, fields, field_ids=None,
                             seed: int | None = None) -> RatioSurvey:
    """``||f||_inf / (||(-Delta_V)**(s/2) f||**(1/s) ||f||**(1 - 1/s))``; also the two-term equality gap."""
    if not 1 < s < 2:
        raise DomainError(f"the L-infinity interpolation needs 1 < s < 2, got {s}")
    grid = op.grid
    fields = np.asarray(fields, dtype=complex)
    if fields.ndim == 2:
        fields = fields[None]
    ids = list(field_ids) if field_ids is not None else [f"f{j}" for j in range(len(fields))]
    l2 = l2_norm(grid, fields)
    pv = np.sqrt(np.maximum(power_norms_squared(op, [s], fields)[0], 0.0))
    p0 = l2_norm(grid, free_fractional_laplacian(grid, fields, s))
    linf = lp_norm(grid, fields, np.inf)
    sample_ids, ratios, gaps = [], [], []
    skipped = 0
    for fid, a, b, c, d in zip(ids, linf, pv, l2, p0):
        if c == 0 or b == 0:
            skipped += 1
            continue
        sample_ids.append(fid)
        ratios.append(a / (b ** (1.0 / s) * c ** (1.0 - 1.0 / s)))
        gaps.append(two_term_gap(s, d, c))
    return RatioSurvey("linf_interpolation", {"s": s}, sample_ids, ratios, None, grid.n, grid.L, seed,
                       skipped, {"two_term_gap": float(max(gaps)) if gaps else 0.0})


# -- regular point ------------------------------------------------------------------------

# Mean of log|x| over the unit square centred at the origin: (-ln 2 - 3 + pi/2) / 2.
CELL_LOG_MEAN = 0.5 * (-math.log(2.0) - 3.0 + 0.5 * math.pi)


def cell_log_mean_oracle() -> float:
    """Independent sub-cell quadrature of the same mean (one quadrant, by symmetry)."""
    val, _ = integrate.dblquad(lambda y, x: 0.5 * math.log(x * x + y * y), 0.0, 0.5, 0.0, 0.5,
                               epsabs=1e-13, epsrel=1e-13)
    return 4.0 * val


def log_potential_matrix(grid: Grid2D) -> np.ndarray:
    """``G0`` with kernel ``-(2 pi)**-1 log|x - y|``, cell weight ``h**2``; diagonal by cell average."""
    X = grid.X.ravel()
    Y = grid.Y.ravel()
    d2 = (X[:, None] - X[None, :]) ** 2 + (Y[:, None] - Y[None, :]) ** 2
    np.fill_diagonal(d2, 1.0)
    G = -0.5 * np.log(d2)
    np.fill_diagonal(G, -(math.log(grid.h) + CELL_LOG_MEAN))
    return G * (grid.h**2 / (2.0 * math.pi))


@dataclass
class RegularPointProblem:
    grid: Grid2D
    V: np.ndarray
    v: np.ndarray
    U: np.ndarray
    G0: np.ndarray

    @property
    def M(self) -> np.ndarray:
        v = self.v.ravel()
        return np.diag(self.U.ravel()) + v[:, None] * self.G0 * v[None, :]

    def projections(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.v.ravel()
        P = np.outer(v, v) / (v @ v)
        return P, np.eye(len(v)) - P


def build_regular_point_problem(V, grid: Grid2D) -> RegularPointProblem:
    if isinstance(V, PotentialSpec):
        V = sample_potential(V, grid)
    V = np.asarray(V)
    if np.iscomplexobj(V):
        if np.any(V.imag):
            raise PreconditionError("the regular-point test needs a real potential V")
        V = V.real
    if not np.any(V):
        raise PreconditionError('the regular-point test requires "Let V ≢ 0"; got V ≡ 0')
    return RegularPointProblem(grid, V, np.sqrt(np.abs(V)), np.sign(V), log_potential_matrix(grid))


def restricted_spectrum(problem: RegularPointProblem) -> np.ndarray:
    """Eigenvalues of ``Q M Q`` on the orthogonal complement of ``v`` (Householder basis)."""
    v = problem.v.ravel()
    u = v.copy()
    u[0] += math.copysign(np.linalg.norm(v), v[0] if v[0] else 1.0)
    u /= np.linalg.norm(u)
    M = problem.M
    # H M H with H = I - 2 u u^T; its trailing block acts on v-perp.
    Mu = M @ u
    B = M - 2.0 * np.outer(u, Mu) - 2.0 * np.outer(Mu, u) + 4.0 * (u @ Mu) * np.outer(u, u)
    return np.linalg.eigvalsh(B[1:, 1:])


@dataclass
class RegularPointResult:
    n: int
    L: float
    sigma_min: float
    sigma_max: float


@dataclass
class RegularPointVerdict:
    results: list
    drift: float
    floor: float
    max_drift: float

    @property
    def verdict(self) -> str:
        ok = all(r.sigma_min > self.floor for r in self.results) and self.drift < self.max_drift
        return "regular" if ok else "not regular"


def regular_point_check(V, grid: Grid2D) -> RegularPointResult:
    """Smallest and largest restricted singular values of ``Q (U + v G0 v) Q``."""
    ev = np.abs(restricted_spectrum(build_regular_point_problem(V, grid)))
    return RegularPointResult(grid.n, grid.L, float(ev.min()), float(ev.max()))


def regular_point_survey(spec: PotentialSpec, L: float, ns=(32, 48, 64), max_drift: float = 0.30,
                         floor: float = 1e-8) -> RegularPointVerdict:
    """Refinement-tracked verdict: positive smallest value with bounded drift across ``ns``."""
    if spec.is_zero:
        raise PreconditionError('the regular-point test requires "Let V ≢ 0"; got V ≡ 0')
    results = [regular_point_check(spec, Grid2D(n, L)) for n in ns]
    return RegularPointVerdict(results, _drift([r.sigma_min for r in results]), floor, max_drift)

