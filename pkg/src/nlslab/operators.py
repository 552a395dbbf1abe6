"""The discrete Schroedinger operator ``H = -Delta + V`` and its functional calculus.

Two independent routes to fractional powers are provided:

* ``fractional_power_spectral`` multiplies by ``mu**(s/2)`` in a verified
  dense eigenbasis (``n <= 64``);
* ``fractional_power_balakrishnan`` evaluates the resolvent integral
  ``c(s) H int_0^inf tau**(s/2-1) (tau + H)**-1 dtau`` with a Gauss-Legendre
  rule in ``log tau`` and preconditioned conjugate-gradient resolvents, so it
  never touches the eigenbasis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import CapabilityError, CapacityError, DomainError, NumericError
from .grid import Grid2D, galilei_phase, inner, l2_norm
from .potentials import PotentialSpec, sample_potential

DENSE_MAX_N = 64
CG_RTOL = 1e-10


class SpectralOperator:
    """``-Delta_V = -Delta + V`` on a periodic grid.

    Immutable after construction.  In ``"dense"`` mode the eigenpairs are
    computed once and checked (residual < 1e-8 per pair); ``"matrix-free"``
    mode only offers FFT actions and CG resolvents.
    """

    def __init__(self, grid: Grid2D, V: np.ndarray, mode: str = "matrix-free"):
        V = np.asarray(V)
        if np.iscomplexobj(V):
            if np.any(V.imag != 0):
                raise DomainError("potential must be real")
            V = V.real
        if V.shape != (grid.n, grid.n):
            raise DomainError(f"potential shape {V.shape} does not match grid {grid.n}x{grid.n}")
        if mode not in ("matrix-free", "dense"):
            raise DomainError(f"unknown operator mode {mode!r}")
        if mode == "dense" and grid.n > DENSE_MAX_N:
            raise CapacityError(
                f"dense mode is limited to n <= {DENSE_MAX_N} (matrix size {DENSE_MAX_N**2}); got n={grid.n}"
            )
        self.grid = grid
        self.V = np.array(V, dtype=float)
        self.V.setflags(write=False)
        self.mode = mode
        self.is_free = not np.any(self.V)
        if mode == "dense":
            self._eigendecompose()

    # -- actions ---------------------------------------------------------

    def apply(self, f: np.ndarray) -> np.ndarray:
        """``(-Delta + V) f``."""
        return sfft.ifft2(self.grid.k2 * sfft.fft2(f, axes=(-2, -1)), axes=(-2, -1)) + self.V * f

    def __matmul__(self, f):
        return self.apply(f)

    @property
    def spectral_bounds(self) -> tuple[float, float]:
        """Lower/upper proxies for the positive part of the spectrum."""
        if self.mode == "dense":
            mu = self.eigenvalues
            pos = mu[mu > 1e-9 * mu[-1]]
            return float(pos[0]), float(mu[-1])
        g = self.grid
        lo = (np.pi / g.L) ** 2
        if not self.is_free:
            # The mean of V bounds the ground energy from above; the factor keeps
            # the rule's lower tail below the true bottom of the spectrum.
            lo = 0.25 * min(lo, float(np.mean(self.V)))
        hi = 2.0 * g.k_max**2 + float(np.max(self.V))
        return lo, hi

    # -- dense mode --------------------------------------------------------

    def dense_matrix(self) -> np.ndarray:
        n = self.grid.n
        if n > DENSE_MAX_N:
            raise CapacityError(f"dense matrix limited to n <= {DENSE_MAX_N}")
        D = np.real(np.fft.ifft(-self.grid.k[:, None] ** 2 * np.fft.fft(np.eye(n), axis=0), axis=0))
        D = 0.5 * (D + D.T)
        eye = np.eye(n)
        lap = np.kron(D, eye) + np.kron(eye, D)
        return -lap + np.diag(self.V.ravel())

    def _eigendecompose(self):
        Hm = self.dense_matrix()
        mu, psi = np.linalg.eigh(Hm)
        res = np.linalg.norm(Hm @ psi - psi * mu, axis=0)
        worst = float(np.max(res))
        if worst >= 1e-8:
            raise NumericError(f"eigenpair residual {worst:.3e} exceeds 1e-8", residual=worst)
        self.eigenvalues = mu
        self.eigenvectors = psi
        self.max_eigen_residual = worst

    def _require_dense(self, what: str):
        if self.mode != "dense":
            raise CapabilityError(
                f"{what} needs a dense-mode operator; use fractional_power_balakrishnan "
                "(resolvent quadrature) for matrix-free operators"
            )

    def apply_function(self, fn, f: np.ndarray) -> np.ndarray:
        """``fn(H) f`` through the eigenbasis; ``fn`` maps eigenvalues to multipliers."""
        self._require_dense("spectral functional calculus")
        n = self.grid.n
        shape = f.shape
        flat = np.asarray(f).reshape(-1, n * n).T
        m = flat.shape[1]
        # Real and imaginary parts share one real matmul; a complex operand
        # would force a complex copy of the eigenvector matrix on every call.
        ri = np.concatenate([flat.real, flat.imag], axis=1) if np.iscomplexobj(flat) else flat
        psi = self.eigenvectors
        coef = psi.T @ ri
        mult = fn(self.eigenvalues)
        if np.iscomplexobj(mult):
            c = coef[:, :m] + 1j * coef[:, m:] if ri is not flat else coef.astype(complex)
            c = mult[:, None] * c
            out = psi @ c.real + 1j * (psi @ c.imag)
        else:
            y = psi @ (mult[:, None] * coef)
            out = y[:, :m] + 1j * y[:, m:] if ri is not flat else y.astype(complex)
        return out.T.reshape(shape)


def build_operator(grid: Grid2D, V, mode: str = "matrix-free") -> SpectralOperator:
    """Build ``-Delta_V`` from samples or from a :class:`PotentialSpec`."""
    if isinstance(V, PotentialSpec):
        V = sample_potential(V, grid)
    return SpectralOperator(grid, V, mode)


def export_eigenvalues_csv(op: SpectralOperator, path) -> None:
    import csv

    op._require_dense("eigenvalue export")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue"])
        for i, mu in enumerate(op.eigenvalues):
            w.writerow([i, repr(float(mu))])


# -- resolvent -------------------------------------------------------------


def _pcg(op: SpectralOperator, tau: float, b: np.ndarray, rtol: float, maxiter: int) -> np.ndarray:
    """Preconditioned CG for ``(tau + H) u = b`` over a stack of right-hand sides.

    Preconditioner: the shifted free resolvent ``(tau + shift + |k|**2)**-1``
    with ``shift`` a lower spectral proxy, which keeps the preconditioned
    condition number bounded as ``tau -> 0``.
    """
    g = op.grid
    shift = op.spectral_bounds[0]
    pinv = 1.0 / (tau + shift + g.k2)

    def A(u):
        return tau * u + op.apply(u)

    def M(r):
        return sfft.ifft2(pinv * sfft.fft2(r, axes=(-2, -1)), axes=(-2, -1))

    def dot(a, c):
        return np.sum(np.conj(a) * c, axis=(-2, -1), keepdims=True)

    b = np.asarray(b, dtype=complex)
    bnorm = np.sqrt(np.real(dot(b, b)))
    bnorm = np.where(bnorm == 0, 1.0, bnorm)
    x = M(b)
    r = b - A(x)
    z = M(r)
    p = z.copy()
    rz = dot(r, z)
    for it in range(maxiter):
        rel = np.sqrt(np.real(dot(r, r))) / bnorm
        if np.all(rel <= rtol):
            return x
        Ap = A(p)
        pAp = dot(p, Ap)
        alpha = np.where(pAp == 0, 0.0, rz / np.where(pAp == 0, 1.0, pAp))
        x = x + alpha * p
        r = r - alpha * Ap
        z = M(r)
        rz_new = dot(r, z)
        beta = np.where(rz == 0, 0.0, rz_new / np.where(rz == 0, 1.0, rz))
        p = z + beta * p
        rz = rz_new
    rel = float(np.max(np.sqrt(np.real(dot(r, r))) / bnorm))
    if rel > rtol:
        raise NumericError(f"CG did not converge for tau={tau:.3e}: relative residual {rel:.3e}", residual=rel)
    return x


def resolvent_apply(op: SpectralOperator, tau: float, f: np.ndarray, method: str = "auto",
                    rtol: float = CG_RTOL) -> np.ndarray:
    """``(tau - Delta_V)**-1 f`` for ``tau > 0``.

    ``method``: ``"eigen"`` (dense mode), ``"cg"`` or ``"auto"`` (eigen when
    available).  The free operator is always inverted exactly by FFT.
    """
    if not tau > 0:
        raise DomainError(f"resolvent needs tau > 0, got {tau}")
    if op.is_free:
        return sfft.ifft2(sfft.fft2(f, axes=(-2, -1)) / (tau + op.grid.k2), axes=(-2, -1))
    if method == "auto":
        method = "eigen" if op.mode == "dense" else "cg"
    if method == "eigen":
        return op.apply_function(lambda mu: 1.0 / (tau + mu), f)
    if method != "cg":
        raise DomainError(f"unknown resolvent method {method!r}")
    return _pcg(op, tau, f, rtol, 10 * op.grid.n**2)


def heat_apply(op: SpectralOperator, t: float, f: np.ndarray) -> np.ndarray:
    """``exp(t Delta_V) f``; ``t = 0`` returns ``f``."""
    if t < 0:
        raise DomainError(f"heat semigroup needs t >= 0, got {t}")
    if t == 0:
        return np.array(f, dtype=complex, copy=True)
    if op.is_free:
        return sfft.ifft2(np.exp(-t * op.grid.k2) * sfft.fft2(f, axes=(-2, -1)), axes=(-2, -1))
    return op.apply_function(lambda mu: np.exp(-t * mu), f)


def heat_kernel_matrix(op: SpectralOperator, t: float) -> np.ndarray:
    """Kernel ``exp(t Delta_V)(x, y)`` on node pairs (``h**2``-weighted so it integrates to the action)."""
    op._require_dense("heat kernel matrix")
    psi = op.eigenvectors
    return (psi * np.exp(-t * op.eigenvalues)) @ psi.T / op.grid.h**2


# -- fractional powers -----------------------------------------------------


def _check_power_exponent(s: float):
    if not 0 <= s <= 2:
        raise DomainError(f"exponent s must lie in [0, 2], got {s}")


def fractional_power_spectral(op: SpectralOperator, s: float, f: np.ndarray) -> np.ndarray:
    """``(-Delta_V)**(s/2) f`` by eigenbasis multiplication; kernel modes map to 0 for s > 0."""
    _check_power_exponent(s)
    op._require_dense("fractional_power_spectral")
    if s == 0:
        return np.array(f, dtype=complex, copy=True)
    tol = 1e-12 * op.eigenvalues[-1]
    return op.apply_function(lambda mu: np.where(mu > tol, np.abs(mu), 0.0) ** (s / 2.0), f)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes in ``sigma = log tau`` on ``[log tau_min, log tau_max]``.

    ``weights`` integrate in ``dtau`` (the Jacobian ``tau`` is folded in).
    """

    nodes: np.ndarray
    weights: np.ndarray
    tau_min: float
    tau_max: float

    def __post_init__(self):
        if not np.all(np.diff(self.nodes) > 0) or not np.all(self.weights > 0):
            raise DomainError("quadrature nodes must increase and weights be positive")

    @property
    def size(self) -> int:
        return len(self.nodes)

    @classmethod
    def log_gauss(cls, tau_min: float, tau_max: float, n_nodes: int = 200) -> "QuadratureRule":
        if not 0 < tau_min < tau_max:
            raise DomainError("need 0 < tau_min < tau_max")
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        a, b = math.log(tau_min), math.log(tau_max)
        sigma = 0.5 * (b - a) * x + 0.5 * (a + b)
        tau = np.exp(sigma)
        return cls(tau, 0.5 * (b - a) * w * tau, tau_min, tau_max)

    @classmethod
    def for_spectrum(cls, mu_lo: float, mu_hi: float, low_exponent: float, high_exponent: float,
                     n_nodes: int = 200, tail_tol: float = 1e-9) -> "QuadratureRule":
        """Truncation chosen so both neglected tails are below ``tail_tol`` (relative).

        For an integrand behaving like ``tau**(low_exponent-1)`` below the
        spectrum and ``tau**(-high_exponent-1)`` above it.  The range always
        contains ``tau = 1`` so that ``c(s)`` can share the rule.
        """
        lo = min(mu_lo, 1.0) * (tail_tol * low_exponent) ** (1.0 / low_exponent)
        hi = max(mu_hi, 1.0) * (tail_tol * high_exponent) ** (-1.0 / high_exponent)
        return cls.log_gauss(lo, hi, n_nodes)

    @classmethod
    def balakrishnan(cls, op: SpectralOperator, s: float, n_nodes: int = 200,
                     tail_tol: float = 1e-9) -> "QuadratureRule":
        lo, hi = op.spectral_bounds
        return cls.for_spectrum(lo, hi, s / 2.0, 1.0 - s / 2.0, n_nodes, tail_tol)

    @classmethod
    def sandwich(cls, op: SpectralOperator, s: float, n_nodes: int = 200,
                 tail_tol: float = 1e-9) -> "QuadratureRule":
        """Rule for ``tau**(s/2) R W R`` integrands (resolvent on both sides of a weight)."""
        lo, hi = op.spectral_bounds
        return cls.for_spectrum(lo, hi, s / 2.0 + 1.0, 1.0 - s / 2.0, n_nodes, tail_tol)


def c_of_s(s: float, rule: QuadratureRule | None = None) -> float:
    """``c(s) = 1 / int_0^inf tau**(s/2-1) (tau+1)**-1 dtau`` by quadrature."""
    if not 0 < s < 2:
        raise DomainError(f"c(s) is defined for 0 < s < 2, got {s}")
    if rule is None:
        rule = QuadratureRule.for_spectrum(1.0, 1.0, s / 2.0, 1.0 - s / 2.0, n_nodes=400, tail_tol=1e-13)
    tau = rule.nodes
    return 1.0 / float(np.sum(rule.weights * tau ** (s / 2.0 - 1.0) / (tau + 1.0)))


def fractional_power_balakrishnan(op: SpectralOperator, s: float, f: np.ndarray,
                                  rule: QuadratureRule | None = None, method: str = "cg") -> np.ndarray:
    """``(-Delta_V)**(s/2) f`` via the resolvent integral, for ``0 < s < 2``.

    ``H`` is applied before the integral (it commutes with every resolvent),
    which keeps the kernel of the free operator from being amplified by the
    ``1/tau`` resolvent behaviour at small ``tau``.
    """
    if not 0 < s < 2:
        raise DomainError(f"Balakrishnan route needs 0 < s < 2, got {s}")
    if rule is None:
        rule = QuadratureRule.balakrishnan(op, s)
    c = c_of_s(s, rule)
    g = op.apply(f)
    if op.is_free:
        g = sfft.ifft2(np.where(op.grid.k2 == 0, 0.0, 1.0) * sfft.fft2(g, axes=(-2, -1)), axes=(-2, -1))
    acc = np.zeros_like(g, dtype=complex)
    for tau, w in zip(rule.nodes, rule.weights):
        acc += (w * tau ** (s / 2.0 - 1.0)) * resolvent_apply(op, tau, g, method=method)
    return c * acc


def fractional_power(op: SpectralOperator, s: float, f: np.ndarray) -> np.ndarray:
    """Best available route: FFT multiplier (free), eigenbasis (dense) or resolvent quadrature."""
    _check_power_exponent(s)
    if op.is_free:
        return np.array(f, dtype=complex, copy=True) if s == 0 else \
            sfft.ifft2(op.grid.kabs**s * sfft.fft2(f, axes=(-2, -1)), axes=(-2, -1))
    if op.mode == "dense":
        return fractional_power_spectral(op, s, f)
    if s == 0:
        return np.array(f, dtype=complex, copy=True)
    if s == 2:
        return op.apply(f)
    return fractional_power_balakrishnan(op, s, f)


# -- Galilei-conjugated operators ------------------------------------------


def apply_JV(op: SpectralOperator, t: float, s: float, f: np.ndarray, power=None) -> np.ndarray:
    """``|J_V|**s(t) f = M(-t) (-t**2 Delta_V)**(s/2) M(t) f``.

    ``power(s, g)`` overrides the fractional-power route (defaults to
    :func:`fractional_power`).
    """
    if t == 0:
        raise DomainError("|J_V|^s(t) is undefined at t = 0")
    _check_power_exponent(s)
    if s == 0:
        return np.array(f, dtype=complex, copy=True)
    power = power or (lambda s_, g: fractional_power(op, s_, g))
    m = galilei_phase(op.grid, t)
    return abs(t) ** s * np.conj(m) * power(s, m * f)


def apply_J_free(grid: Grid2D, t: float, s: float, f: np.ndarray) -> np.ndarray:
    """Free analogue ``|J|**s(t) = M(-t) (-t**2 Delta)**(s/2) M(t)`` by FFT."""
    if t == 0:
        raise DomainError("|J|^s(t) is undefined at t = 0")
    if s == 0:
        return np.array(f, dtype=complex, copy=True)
    m = galilei_phase(grid, t)
    return abs(t) ** s * np.conj(m) * sfft.ifft2(grid.kabs**s * sfft.fft2(m * f, axes=(-2, -1)), axes=(-2, -1))


def symmetry_defect(op_apply, grid: Grid2D, f: np.ndarray, g: np.ndarray) -> float:
    """``|<Af, g> - <f, Ag>| / (||f|| ||g||)`` for a linear action ``op_apply``."""
    lhs = inner(grid, op_apply(f), g)
    rhs = inner(grid, f, op_apply(g))
    return float(abs(lhs - rhs) / (l2_norm(grid, f) * l2_norm(grid, g)))


# -- quadratic forms -------------------------------------------------------------


def lanczos_quadratic_form(op: SpectralOperator, fns, f: np.ndarray, steps: int = 120) -> np.ndarray:
    """Gauss quadrature ``<f, fn(H) f>`` from ``steps`` Lanczos iterations.

    Runs one batched Lanczos recursion per field and evaluates every ``fn``
    in ``fns`` on the same tridiagonal matrix, so a family of powers costs a
    single sweep of operator applications.  Returns shape
    ``(len(fns),) + f.shape[:-2]``.  No reorthogonalization: Gauss quadrature
    from finite-precision Lanczos stays accurate even after orthogonality is lost.
    """
    grid = op.grid
    f = np.asarray(f, dtype=complex)
    batch = f.shape[:-2]
    q = f.reshape((-1,) + f.shape[-2:])
    nrm2 = np.real(np.sum(np.conj(q) * q, axis=(-2, -1)))
    safe = np.where(nrm2 == 0, 1.0, np.sqrt(nrm2))
    q = q / safe[:, None, None]
    q_prev = np.zeros_like(q)
    m = q.shape[0]
    alpha = np.zeros((m, steps))
    beta = np.zeros((m, steps))
    k_used = steps
    for j in range(steps):
        w = op.apply(q)
        a = np.real(np.sum(np.conj(q) * w, axis=(-2, -1)))
        alpha[:, j] = a
        w = w - a[:, None, None] * q - (beta[:, j - 1][:, None, None] * q_prev if j else 0.0)
        b = np.sqrt(np.real(np.sum(np.conj(w) * w, axis=(-2, -1))))
        beta[:, j] = b
        if np.all(b < 1e-13 * np.maximum(np.abs(alpha[:, : j + 1]).max(axis=1), 1.0)):
            k_used = j + 1
            break
        q_prev, q = q, w / np.where(b == 0, 1.0, b)[:, None, None]
    out = np.zeros((len(fns), m))
    for i in range(m):
        T = np.diag(alpha[i, :k_used]) + np.diag(beta[i, : k_used - 1], 1) + np.diag(beta[i, : k_used - 1], -1)
        theta, Y = np.linalg.eigh(T)
        theta = np.maximum(theta, 0.0)
        w0 = Y[0] ** 2
        for a_, fn in enumerate(fns):
            out[a_, i] = np.sum(w0 * fn(theta))
    out *= nrm2[None, :] * grid.h**2
    return out.reshape((len(fns),) + batch)
