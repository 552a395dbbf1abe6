"""Modified Bessel function K0 and the Lm norms of the free resolvent kernel.

Ascending series for ``r <= 2``; for ``r > 2`` Steed's continued fraction
(Temme's CF2 form, as in Numerical Recipes ``bessik``), which converges to
full double precision where a truncated asymptotic series cannot.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061
_SERIES_TERMS = 30
_CF_MAXIT = 10000
_EPS = 1e-16


def _k0_series(r: np.ndarray) -> np.ndarray:
    q = 0.25 * r * r
    term = np.ones_like(r)
    i0 = np.ones_like(r)
    acc = np.zeros_like(r)
    harmonic = 0.0
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * k)
        harmonic += 1.0 / k
        i0 = i0 + term
        acc = acc + term * harmonic
    return -(np.log(0.5 * r) + EULER_GAMMA) * i0 + acc


def _k0_cf2(x: float) -> float:
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, _CF_MAXIT):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    return math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s


def bessel_k0(r):
    """``K0(r)`` for ``r > 0`` (scalar or array), relative accuracy ~1e-15."""
    arr = np.asarray(r, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("K0 is defined for r > 0")
    out = np.empty_like(arr)
    small = arr <= 2.0
    if np.any(small):
        out[small] = _k0_series(arr[small])
    big = ~small
    if np.any(big):
        out[big] = [_k0_cf2(x) for x in arr[big].ravel()]
    return float(out) if out.ndim == 0 else out


def k0_integral_oracle(r: float) -> float:
    """Independent value from ``K0(r) = int_0^inf exp(-r cosh theta) dtheta``."""
    # Beyond theta_max the integrand is below exp(-700).
    theta_max = math.acosh(max(1.0, 700.0 / r)) + 1.0
    val, _ = integrate.quad(lambda th: math.exp(-r * math.cosh(th)), 0.0, theta_max,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def kernel_lm_norm(tau: float, m: float) -> float:
    """``|| K0(sqrt(tau) |.|) ||_{L^m(R^2)}`` by radial quadrature."""
    if not tau > 0:
        raise DomainError("tau must be positive")
    if not 1 <= m < np.inf:
        raise DomainError("m must lie in [1, inf)")
    st = math.sqrt(tau)

    def integrand(u):
        # r = exp(u) absorbs the log singularity at the origin.
        r = math.exp(u)
        return abs(bessel_k0(st * r)) ** m * 2.0 * math.pi * r * r

    # The integrand peaks near r ~ 1/sqrt(tau) and decays like exp(-m sqrt(tau) r).
    centre = -math.log(st)
    lo = centre - 40.0
    hi = centre + math.log(60.0 / m)
    pieces = np.linspace(lo, hi, 9)
    total = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
    return total ** (1.0 / m)


def kernel_scaling_slope(m: float, taus=(0.25, 1.0, 4.0, 16.0)) -> float:
    """Least-squares log-log slope of ``kernel_lm_norm`` in ``tau`` (expected ``-1/m``)."""
    lt = np.log(np.asarray(taus, dtype=float))
    ln = np.log([kernel_lm_norm(t, m) for t in taus])
    return float(np.polyfit(lt, ln, 1)[0])
