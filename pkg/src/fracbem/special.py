"""Special functions and Caputo-derivative oracles.

``caputo_quadrature`` evaluates the Caputo integral directly and is kept
independent of the operational-matrix machinery so it can serve as a test
oracle for it.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import mpmath
import numpy as np
from scipy import integrate
from scipy.special import gammaln, rgamma

__all__ = [
    "CaputoOrder",
    "ConvergenceError",
    "gamma_fn",
    "mittag_leffler",
    "mittag_leffler_time_derivative",
    "caputo_monomial",
    "caputo_power",
    "caputo_quadrature",
]

_MAX_TERMS = 100_000


class ConvergenceError(ArithmeticError):
    """A series or quadrature failed to reach its tolerance."""


@dataclass(frozen=True)
class CaputoOrder:
    """Fractional order ``alpha`` together with ``m = ceil(alpha)``."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"Caputo order must be positive, got {self.alpha}")

    @property
    def m(self) -> int:
        return math.ceil(self.alpha - 1e-14)

    @property
    def is_integer(self) -> bool:
        return abs(self.alpha - self.m) < 1e-14


def _as_order(order) -> CaputoOrder:
    return order if isinstance(order, CaputoOrder) else CaputoOrder(float(order))


def gamma_fn(x: float) -> float:
    """Gamma function; poles map to a signed infinity.

    At a non-positive integer ``-n`` the sign is that of the limit from the
    right, ``(-1)**n``.
    """
    if x <= 0 and float(x).is_integer():
        return math.inf if int(-x) % 2 == 0 else -math.inf
    try:
        return math.gamma(x)
    except OverflowError:
        return math.inf


# --------------------------------------------------------------------------
# Mittag-Leffler
# --------------------------------------------------------------------------

def _log_term_peak(alpha: float, z: float) -> tuple[float, int]:
    """Largest log-magnitude of ``z**k / Gamma(alpha k + 1)`` and its index."""
    if z == 0:
        return 0.0, 0
    lz = math.log(abs(z))
    # the log-terms are concave in k; walk in blocks until they turn down
    best, kbest, k = 0.0, 0, 0
    while k < _MAX_TERMS:
        ks = np.arange(k, k + 512)
        lt = ks * lz - gammaln(alpha * ks + 1.0)
        i = int(np.argmax(lt))
        if lt[i] > best:
            best, kbest = float(lt[i]), int(ks[i])
        if lt[-1] < lt[0] and i < len(ks) - 1:
            break
        k += 512
    return best, kbest


def _ml_series_double(alpha: float, z: np.ndarray) -> np.ndarray:
    """Vectorised series with Neumaier compensated summation."""
    z = np.asarray(z, dtype=float)
    total = np.ones_like(z)
    comp = np.zeros_like(z)
    absz = np.abs(z)
    with np.errstate(divide="ignore"):
        lz = np.where(absz > 0, np.log(np.where(absz > 0, absz, 1.0)), -np.inf)
    sign = np.sign(z)
    for k in range(1, _MAX_TERMS):
        logmag = k * lz - gammaln(alpha * k + 1.0)
        term = np.where(absz > 0, sign ** k * np.exp(logmag), 0.0)
        t = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - t) + term, (term - t) + total)
        total = t
        # past the peak and negligible everywhere
        if np.all((logmag < math.log(1e-18)) & (k * alpha > 2 * absz ** (1 / alpha))):
            return total + comp
    raise ConvergenceError("Mittag-Leffler series did not converge")


def _ml_series_mp(alpha: float, z: float, digits: int) -> float:
    with mpmath.workdps(digits):
        zz = mpmath.mpf(z)
        # the Gamma argument must be formed in extended precision too: its
        # double rounding is amplified by the cancellation
        aa = mpmath.mpf(alpha)
        acc = mpmath.mpf(1)
        tol = mpmath.mpf(10) ** (-digits)
        k = 1
        while k < _MAX_TERMS:
            term = zz ** k * mpmath.rgamma(aa * k + 1)
            acc += term
            if abs(term) < tol * max(1, abs(acc)) and k * alpha > 2 * abs(z) ** (1 / alpha):
                return float(acc)
            k += 1
    raise ConvergenceError("Mittag-Leffler series did not converge")


def _ml_negative_integral(alpha: float, x: float) -> float:
    """``E_alpha(-x)`` for ``0 < alpha < 1``, ``x > 0`` by its spectral integral."""
    s = x ** (1.0 / alpha)
    sa, ca = math.sin(alpha * math.pi), math.cos(alpha * math.pi)

    def spectral(r):
        ra = r ** alpha
        return math.exp(-r * s) * sa / (math.pi * (ra * ra + 2 * ra * ca + 1))

    head, e1 = integrate.quad(spectral, 0.0, 1.0, weight="alg", wvar=(alpha - 1.0, 0.0),
                              epsabs=1e-14, epsrel=1e-12, limit=200)
    tail, e2 = integrate.quad(lambda r: spectral(r) * r ** (alpha - 1.0), 1.0, np.inf,
                              epsabs=1e-14, epsrel=1e-12, limit=200)
    return head + tail


def _ml_scalar(alpha: float, z: float) -> float:
    if z == 0:
        return 1.0
    peak, _ = _log_term_peak(alpha, z)
    if z > 0:
        if peak > 700:
            raise OverflowError(f"E_{alpha}({z}) overflows double precision")
        return float(_ml_series_double(alpha, np.array([z]))[0])
    # alternating series: every digit of the peak term is lost to cancellation
    lost = peak / math.log(10)
    if lost < 4:
        value = float(_ml_series_double(alpha, np.array([z]))[0])
        if _digits_cancelled(peak, value) < 1:
            return value
    elif alpha < 1 and lost > 60:
        return _ml_negative_integral(alpha, -z)
    # the cancellation is measured against the result, which can be far below 1,
    # so the working precision is raised until it covers the observed loss
    # (capped: near a real zero of E_alpha no finite budget gives relative accuracy)
    digits, cap = int(lost) + 25, int(lost) + 125
    while True:
        value = _ml_series_mp(alpha, z, digits)
        needed = _digits_cancelled(peak, value) + 20
        if needed <= digits or digits >= cap:
            return value
        digits = min(max(digits + 5, math.ceil(needed)), cap)


def _digits_cancelled(log_peak: float, value: float) -> float:
    if value == 0:
        return math.inf
    return (log_peak - math.log(abs(value))) / math.log(10)


def mittag_leffler(alpha: float, z):
    """One-parameter Mittag-Leffler function ``sum z^k / Gamma(alpha k + 1)``.

    Accepts a scalar or an array ``z``. Small arguments use a vectorised
    double-precision series; arguments whose alternating series would lose
    more than a few digits to cancellation are summed in extended precision
    (or, for ``alpha < 1`` and large negative ``z``, integrated through the
    spectral representation).
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    za = np.asarray(z, dtype=float)
    if za.ndim == 0:
        return _ml_scalar(alpha, float(za))
    out = np.empty_like(za)
    flat, res = za.ravel(), out.ravel()
    # fast path where the series peak stays O(1)
    small = np.abs(flat) <= min(2.0, 2.0 ** alpha)
    if small.any():
        res[small] = _ml_series_double(alpha, flat[small])
    for idx in np.flatnonzero(~small):
        res[idx] = _ml_scalar(alpha, float(flat[idx]))
    return out


def mittag_leffler_time_derivative(alpha: float, lam: float, t, n: int = 0):
    """``d^n/dt^n E_alpha(lam t^alpha)`` by termwise differentiation.

    Terms whose power of ``t`` is an integer below ``n`` vanish through the
    reciprocal Gamma function. Intended for moderate ``|lam| t^alpha``
    (under about 10); ``t`` must be positive when ``n > 0``.
    """
    t = np.asarray(t, dtype=float)
    if n == 0:
        return mittag_leffler(alpha, lam * t ** alpha)
    if np.any(t <= 0):
        raise ValueError("derivatives of E_alpha(lam t^alpha) need t > 0")
    total = np.zeros_like(t)
    comp = np.zeros_like(t)
    lt = np.log(t)
    for k in range(0, _MAX_TERMS):
        c = rgamma(alpha * k + 1 - n)
        term = c * lam ** k * np.exp((alpha * k - n) * lt)
        s = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - s) + term, (term - s) + total)
        total = s
        if k > 5 and np.all(np.abs(term) < 1e-18 * np.maximum(1.0, np.abs(total))) \
                and k * alpha > 2 * abs(lam) * np.max(t) ** alpha + n:
            return total + comp
    raise ConvergenceError("Mittag-Leffler derivative series did not converge")


# --------------------------------------------------------------------------
# Caputo derivatives
# --------------------------------------------------------------------------

def caputo_power(order, beta: float) -> tuple[float, float]:
    """Caputo derivative of ``t**beta`` as ``(coefficient, exponent)``.

    Integer powers below ``m`` are annihilated and give ``(0, 0)``.
    Non-integer ``beta`` must exceed ``m - 1``.
    """
    order = _as_order(order)
    m = order.m
    if float(beta).is_integer() and beta < m:
        return 0.0, 0.0
    if not float(beta).is_integer() and beta <= m - 1:
        raise ValueError(f"t^{beta} has no integrable {m}-th derivative at 0")
    if order.is_integer:
        # classical derivative; avoids Gamma poles for integer beta >= m
        coef = math.prod(beta - i for i in range(m))
        return float(coef), beta - m
    return math.exp(math.lgamma(beta + 1) - math.lgamma(beta + 1 - order.alpha)), beta - order.alpha


def caputo_monomial(order, k: int) -> tuple[float, float]:
    """Caputo derivative of ``t**k`` for a non-negative integer ``k``."""
    if k < 0 or int(k) != k:
        raise ValueError("k must be a non-negative integer")
    return caputo_power(order, int(k))


def _fd_derivative(u: Callable, tau: float, m: int) -> float:
    """Fourth-order finite difference for the m-th derivative (m = 1, 2)."""
    if m == 1:
        h = 1e-4
        if tau - 2 * h >= 0:
            return (-u(tau + 2 * h) + 8 * u(tau + h) - 8 * u(tau - h) + u(tau - 2 * h)) / (12 * h)
        f = [u(tau + i * h) for i in range(5)]
        return (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    if m == 2:
        h = 2e-3
        if tau - 2 * h >= 0:
            return (-u(tau + 2 * h) + 16 * u(tau + h) - 30 * u(tau)
                    + 16 * u(tau - h) - u(tau - 2 * h)) / (12 * h * h)
        f = [u(tau + i * h) for i in range(6)]
        return (45 * f[0] - 154 * f[1] + 214 * f[2] - 156 * f[3] + 61 * f[4] - 10 * f[5]) / (12 * h * h)
    raise ValueError("finite differences are provided for m <= 2; pass du explicitly")


def caputo_quadrature(order, u: Callable[[float], float], t: float,
                      du: Optional[Callable[[float], float]] = None,
                      tol: float = 1e-10) -> float:
    """Caputo derivative of ``u`` at ``t`` by direct quadrature.

    Parameters
    ----------
    order : CaputoOrder or float
        Fractional order ``alpha``.
    u : callable
        Scalar function of time.
    t : float
        Evaluation time, ``t > 0``.
    du : callable, optional
        The ``m``-th classical derivative of ``u``. When omitted it is
        approximated by fourth-order finite differences.
    tol : float
        Relative tolerance handed to the adaptive quadrature.

    Notes
    -----
    The weakly singular kernel ``(t - tau)^(m - alpha - 1)`` is removed by
    the substitution ``w = (t - tau)^(m - alpha)``; the remaining integrand
    is integrated adaptively, which also copes with integrable singularities
    of ``u^(m)`` at the origin.
    """
    order = _as_order(order)
    if not t > 0:
        raise ValueError("caputo_quadrature needs t > 0")
    m = order.m
    deriv = du if du is not None else (lambda s: _fd_derivative(u, s, m))
    if order.is_integer:
        return float(deriv(t))
    mu = m - order.alpha

    def integrand(w):
        return deriv(max(t - w ** (1.0 / mu), 0.0))

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(integrand, 0.0, t ** mu, epsabs=1e-13, epsrel=tol, limit=400)
        except integrate.IntegrationWarning as exc:
            raise ConvergenceError(f"Caputo quadrature failed: {exc}") from exc
    return val / (mu * math.gamma(mu))
