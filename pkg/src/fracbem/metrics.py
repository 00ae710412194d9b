"""Error norms and empirical convergence orders."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["ErrorReport", "error_norms", "p_zeta_order", "p_tau_order", "b_norm"]

MRE_FLOOR = 1e-14


@dataclass(frozen=True)
class ErrorReport:
    """Maximum, maximum-relative and root-mean-square errors over ``M`` samples.

    ``mre_skipped`` counts samples left out of the relative error because
    the exact value is below ``1e-14`` in magnitude.
    """

    l_inf: float
    mre: float
    rms: float
    M: int
    mre_skipped: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def error_norms(exact, approx) -> ErrorReport:
    exact = np.asarray(exact, dtype=float).ravel()
    approx = np.asarray(approx, dtype=float).ravel()
    if exact.shape != approx.shape:
        raise ValueError(f"length mismatch: {exact.size} vs {approx.size}")
    if exact.size == 0:
        raise ValueError("no samples")
    err = np.abs(exact - approx)
    keep = np.abs(exact) >= MRE_FLOOR
    mre = float(np.max(err[keep] / np.abs(exact[keep]))) if keep.any() else math.nan
    return ErrorReport(float(err.max()), mre, float(np.sqrt(np.mean(err ** 2))), exact.size,
                       int((~keep).sum()))


def p_zeta_order(E1: float, E2: float, N1: float, N2: float) -> float:
    """Spatial order ``log(E1/E2) / log(zeta1/zeta2)`` with ``zeta = 1/N``."""
    if not (E1 > 0 and E2 > 0):
        raise ValueError("errors must be positive")
    if not (N1 > 0 and N2 > 0) or N1 == N2:
        raise ValueError("need two distinct positive resolutions")
    return math.log(E1 / E2) / math.log(N2 / N1)


def b_norm(v) -> float:
    """RMS-style vector norm ``sqrt(mean(v^2))``."""
    v = np.asarray(v, dtype=float).ravel()
    return float(np.sqrt(np.mean(v * v)))


def p_tau_order(b1, b2, b3, K1: int, K2: int, K3: int) -> float:
    """Temporal order from three solutions at geometrically spaced degrees.

    ``b1, b2, b3`` are either vectors (solutions at ``K1 < K2 < K3``) or,
    when all three are scalars, the already-computed difference norms
    ``||b2 - b1||`` and ``||b3 - b2||`` passed as ``(d21, d32, None)``.
    """
    if K1 * K3 != K2 * K2:
        raise ValueError("K1/K2 must equal K2/K3")
    if len({K1, K2, K3}) != 3:
        raise ValueError("degrees must be distinct")
    if b3 is None:
        d21, d32 = float(b1), float(b2)
    else:
        b1, b2, b3 = (np.asarray(b, dtype=float) for b in (b1, b2, b3))
        if not b1.shape == b2.shape == b3.shape:
            raise ValueError("solution vectors must have equal lengths")
        d21, d32 = b_norm(b2 - b1), b_norm(b3 - b2)
    if d21 == 0 or d32 == 0:
        raise ZeroDivisionError("zero difference norm; order undefined")
    return math.log(d21 / d32) / math.log(K2 / K1)
