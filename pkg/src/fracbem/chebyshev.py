"""Shifted Chebyshev basis on ``(0, L)`` and its Caputo operational matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np

__all__ = [
    "ChebBasis",
    "eval_poly",
    "eval_basis_vector",
    "com_fractional",
    "com_integer",
    "project",
    "gram_matrix",
]

_TIME_TOL = 1e-12


def _order_ceil(nu: float) -> int:
    return math.ceil(nu - 1e-14)


@lru_cache(maxsize=64)
def _unit_fractional_matrix(nu: float, K: int) -> np.ndarray:
    """Operational matrix on ``(0, 1)``; the ``L``-dependence is ``L**-nu``.

    The defining sum alternates with terms of size ``~4**K``, so it cannot be
    evaluated in floating point. It factors as ``A @ B / sqrt(pi)`` with

        A[i, l] = (-1)^(i-l) i 4^l (l-1)! C(i+l-1, 2l-1)          (integers)
        B[l, j] = Gamma(l-nu+1/2) / (rho_j Gamma(l-nu-j+1) Gamma(l+j-nu+1))

    ``A`` is exact; ``B`` is rounded to fixed point with enough guard bits
    that the big-integer product is correct to double precision.
    """
    m = _order_ceil(nu)
    n = K + 1
    D = np.zeros((n, n))
    if m > K:
        return D
    A = np.zeros((n, n), dtype=object)
    amax = 1
    for i in range(m, n):
        for lam in range(m, i + 1):
            v = i * 4 ** lam * math.factorial(lam - 1) * math.comb(i + lam - 1, 2 * lam - 1)
            A[i, lam] = -v if (i - lam) % 2 else v
            amax = max(amax, v.bit_length())
    P = amax + 80 + n.bit_length()
    B = np.zeros((n, n), dtype=object)
    with mpmath.workprec(P + 160):
        nu_mp = mpmath.mpf(nu)
        for lam in range(m, n):
            g = mpmath.gamma(lam - nu_mp + mpmath.mpf(1) / 2)
            r1 = mpmath.rgamma(lam - nu_mp + 1)  # 1/Gamma(lam - nu - j + 1) at j = 0
            r2 = r1                             # 1/Gamma(lam + j - nu + 1) at j = 0
            for j in range(n):
                val = g * r1 * r2
                if j == 0:
                    val /= 2
                sign, man, exp, _ = mpmath.mpf(val)._mpf_
                man = -int(man) if sign else int(man)
                shift = exp + P
                B[lam, j] = man << shift if shift >= 0 else man >> -shift
                # 1/Gamma(z - 1) = (z - 1)/Gamma(z): lands on exact zeros at poles
                r1 = r1 * (lam - nu_mp - j)
                r2 = r2 / (lam + j - nu_mp + 1)
    S = A[m:, m:].dot(B[m:, :])
    scale = 2 ** P
    rows = np.array([[v / scale for v in row] for row in S], dtype=float)
    D[m:, :] = rows / math.sqrt(math.pi)
    D.setflags(write=False)
    return D


@dataclass(frozen=True)
class ChebBasis:
    """Shifted Chebyshev polynomials ``T_{L,0..K}`` on ``(0, L)``."""

    L: float
    K: int

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("time horizon L must be positive")
        if int(self.K) != self.K or self.K < 0:
            raise ValueError("degree K must be a non-negative integer")

    @property
    def size(self) -> int:
        return self.K + 1

    def _check_time(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        tol = _TIME_TOL * self.L
        if np.any(t < -tol) or np.any(t > self.L + tol):
            raise ValueError(f"time outside [0, {self.L}]")
        return np.clip(t, 0.0, self.L)

    def eval_poly(self, i: int, t):
        """``T_{L,i}(t)`` by the three-term recurrence."""
        if not 0 <= i <= self.K:
            raise IndexError(f"degree {i} outside 0..{self.K}")
        return self.basis_vector(t)[i]

    def basis_vector(self, t) -> np.ndarray:
        """``Phi(t)``; shape ``(K+1,)`` for scalar ``t``, else ``(K+1, *t.shape)``."""
        t = self._check_time(t)
        x = 2.0 * t / self.L - 1.0
        out = np.empty((self.size,) + t.shape)
        out[0] = 1.0
        if self.K >= 1:
            out[1] = x
        for i in range(1, self.K):
            out[i + 1] = 2.0 * x * out[i] - out[i - 1]
        return out

    def evaluate(self, coeffs, t) -> np.ndarray:
        """Evaluate a series (last axis = degree) at ``t``."""
        return np.asarray(coeffs) @ self.basis_vector(t)

    def fractional_matrix(self, nu: float) -> np.ndarray:
        """Caputo operational matrix: ``D^nu Phi(t) ~ fractional_matrix(nu) @ Phi(t)``."""
        if not nu > 0:
            raise ValueError("order must be positive")
        if self.K < _order_ceil(nu):
            raise ValueError(f"K >= ceil(nu) = {_order_ceil(nu)} required")
        return _unit_fractional_matrix(float(nu), self.K) * self.L ** (-nu)

    def integer_matrix(self, n: int) -> np.ndarray:
        """``n``-th power of the first-order matrix (identity for ``n = 0``)."""
        if n < 0 or int(n) != n:
            raise ValueError("n must be a non-negative integer")
        if n == 0:
            return np.eye(self.size)
        return np.linalg.matrix_power(self.fractional_matrix(1.0), int(n))

    # -- expansions and inner products -----------------------------------

    def projection_nodes(self) -> np.ndarray:
        """Chebyshev-Gauss points (``2K+2`` of them) mapped to ``(0, L)``."""
        q = 2 * self.K + 2
        theta = np.pi * (np.arange(q) + 0.5) / q
        return 0.5 * self.L * (1.0 + np.cos(theta))

    def project_samples(self, values) -> np.ndarray:
        """Coefficients from samples at :meth:`projection_nodes` (last axis)."""
        values = np.asarray(values, dtype=float)
        q = 2 * self.K + 2
        if values.shape[-1] != q:
            raise ValueError(f"expected {q} samples on the last axis")
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("non-finite value in projection samples")
        theta = np.pi * (np.arange(q) + 0.5) / q
        C = np.cos(np.outer(np.arange(self.size), theta)) * (2.0 / q)
        C[0] *= 0.5
        return values @ C.T

    def projection_rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes ``t`` and matrix ``C`` with ``coeffs = f(t) @ C.T``.

        Evaluates the weighted projection integrals
        ``(2/pi) int_0^pi f(t(theta)) cos(j theta) dtheta`` with Gauss-Legendre
        panels graded towards ``t = 0``, so that sources behaving like
        ``t^beta`` there are projected to near machine precision.
        """
        ratio, levels = 0.3, 40
        # panels in phi = pi - theta, graded towards phi = 0 (t = 0)
        edges = np.concatenate([[0.0], np.pi * ratio ** np.arange(levels, -1, -1.0)])
        phis, ws = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            npts = 12 + math.ceil(1.2 * self.K * (b - a) / np.pi)
            x, w = np.polynomial.legendre.leggauss(npts)
            phis.append(0.5 * (b - a) * (x + 1.0) + a)
            ws.append(0.5 * (b - a) * w)
        theta = np.pi - np.concatenate(phis)
        w = np.concatenate(ws)
        t = 0.5 * self.L * (1.0 + np.cos(theta))
        C = np.cos(np.outer(np.arange(self.size), theta)) * (w * 2.0 / np.pi)
        C[0] *= 0.5
        return t, C

    def project(self, f) -> np.ndarray:
        """Chebyshev-weighted projection of a vectorised function of time."""
        t, C = self.projection_rule()
        values = np.asarray(f(t), dtype=float)
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("non-finite value in projection samples")
        return values @ C.T

    def gram_matrix(self) -> np.ndarray:
        """Unweighted ``int_0^L T_i T_j dt``, exact by Gauss-Legendre."""
        x, w = np.polynomial.legendre.leggauss(self.K + 2)
        t = 0.5 * self.L * (x + 1.0)
        Phi = self.basis_vector(t)
        W = (Phi * (0.5 * self.L * w)) @ Phi.T
        return 0.5 * (W + W.T)


# module-level spellings of the basis operations

def eval_poly(basis: ChebBasis, i: int, t):
    return basis.eval_poly(i, t)


def eval_basis_vector(basis: ChebBasis, t):
    return basis.basis_vector(t)


def com_fractional(basis: ChebBasis, nu: float) -> np.ndarray:
    return basis.fractional_matrix(nu)


def com_integer(basis: ChebBasis, n: int) -> np.ndarray:
    return basis.integer_matrix(n)


def project(basis: ChebBasis, f) -> np.ndarray:
    return basis.project(f)


def gram_matrix(basis: ChebBasis) -> np.ndarray:
    return basis.gram_matrix()
