"""Chebyshev Tau solver for ``sum_j S_j D^{alpha_j} b = N b + f(t)``.

``b(t) = Psi Phi(t)`` with ``Psi`` of shape ``(M, K+1)``. The residual is
made orthogonal to ``T_0 .. T_{K-m}`` and the ``m`` initial conditions close
the system. Unknowns are ordered node-major (``vec`` of ``Psi`` row by row).

Three solvers produce the same solution:

* ``"dense"``: LU of the full ``M(K+1)`` system.
* ``"schur"``: when every ``S_j = s_j S_0``, the complex Schur form of
  ``S_0^-1 N`` makes the system block triangular, leaving ``M`` small
  ``(K+1)`` solves.
* ``"iterative"``: GMRES on the full system, preconditioned by the Schur
  solver of the nearest proportional system ``S_j ~ s_j S_0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
import scipy.linalg as sla

from .bem import ReducedOdeSystem
from .chebyshev import ChebBasis

__all__ = ["TauSystem", "TauSolution", "SingularTauError", "assemble_tau_system",
           "solve_tau", "eval_b"]

CONDITION_LIMIT = 1e13
_DENSE_LIMIT = 7000
_AUTO_DENSE = 4000
GMRES_TOL = 1e-12


class SingularTauError(np.linalg.LinAlgError):
    """Tau system numerically singular."""

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


def _common_factor(S):
    """Return ``(S0, scales)`` with ``S_j = scales[j] * S0``, or ``None``."""
    S0 = S[-1]
    ref = np.abs(S0).max()
    if ref == 0:
        return None
    k = np.unravel_index(np.argmax(np.abs(S0)), S0.shape)
    scales = []
    for Sj in S:
        s = Sj[k] / S0[k]
        if np.abs(Sj - s * S0).max() > 1e-13 * ref * max(1.0, abs(s)):
            return None
        scales.append(float(s))
    return S0, scales


@dataclass(frozen=True)
class TauSystem:
    """Assembled Tau problem.

    ``blocks`` holds the pieces shared by both solvers: ``Dmats`` (operational
    matrices per order), ``Wt`` (retained Gram columns), ``V`` (initial-value
    functionals as columns) and ``rhs`` (Galerkin right-hand side, ``M x (K-m+1)``).
    """

    sys: ReducedOdeSystem
    basis: ChebBasis
    Dmats: tuple
    Wt: np.ndarray
    V: np.ndarray
    rhs: np.ndarray
    method: str

    @property
    def size(self) -> int:
        return self.sys.M * self.basis.size

    @property
    def matrix(self) -> np.ndarray:
        """Dense ``M(K+1)`` matrix, rows grouped per node (Galerkin, then initial)."""
        M, n = self.sys.M, self.basis.size
        g = self.Wt.shape[1]
        A = np.zeros((M, n, M, n))
        for Sj, D in zip(self.sys.S, self.Dmats):
            A[:, :g] += np.einsum("ik,lc->ickl", Sj, D @ self.Wt)
        A[:, :g] -= np.einsum("ik,lc->ickl", self.sys.Nmat, self.Wt)
        idx = np.arange(M)
        A[idx, g:, idx, :] = self.V.T[None, :, :]
        return A.reshape(M * n, M * n)

    @property
    def vector(self) -> np.ndarray:
        init = np.stack(self.sys.b_init, axis=1)      # (M, m)
        return np.concatenate([self.rhs, init], axis=1).reshape(-1)


def assemble_tau_system(sys: ReducedOdeSystem, basis: ChebBasis,
                        method: str = "auto") -> TauSystem:
    """Collect the Tau equations for ``sys`` on ``basis``.

    ``method`` is ``"dense"``, ``"schur"``, ``"iterative"`` or ``"auto"``
    (``schur`` whenever the ``S_j`` share a common factor, else dense up to
    4000 unknowns and iterative beyond).
    """
    K, m = basis.K, sys.m
    if K < m:
        raise ValueError(f"K >= ceil(alpha) = {m} required")
    if sys.f_coeffs.shape != (sys.M, basis.size):
        raise ValueError(f"f_coeffs must be {sys.M} x {basis.size}")
    for Sj in sys.S:
        if Sj.shape != sys.Nmat.shape:
            raise ValueError("S_j and N must have matching shapes")
    if method not in ("auto", "dense", "schur", "iterative"):
        raise ValueError("method must be 'auto', 'dense', 'schur' or 'iterative'")
    if method == "auto":
        if _common_factor(sys.S) is not None:
            method = "schur"
        else:
            method = "dense" if sys.M * basis.size <= _AUTO_DENSE else "iterative"
    elif method == "schur" and _common_factor(sys.S) is None:
        raise ValueError("schur solver needs S_j proportional to a common matrix")
    W = basis.gram_matrix()
    ntest = K - m + 1
    Wt = W[:, :ntest]
    # row by row, so a node's equations do not depend on how many nodes there are
    rhs = np.stack([row @ Wt for row in sys.f_coeffs])
    Dmats = tuple(basis.fractional_matrix(a) for a in sys.orders)
    phi0 = basis.basis_vector(0.0)
    V = np.stack([basis.integer_matrix(i) @ phi0 for i in range(m)], axis=1)
    return TauSystem(sys, basis, Dmats, Wt, V, np.asarray(rhs, float), method)


@dataclass(frozen=True)
class TauSolution:
    """``b(t) = Psi Phi(t)``."""

    Psi: np.ndarray
    basis: ChebBasis
    residual_norm: float
    condition: float = math.nan
    method: str = "dense"

    def eval_b(self, t) -> np.ndarray:
        """``Psi Phi(t)``: shape ``(M,)`` for scalar ``t``, else ``(M, *t.shape)``."""
        return np.tensordot(self.Psi, self.basis.basis_vector(t), axes=(1, 0))


def eval_b(sol: TauSolution, t) -> np.ndarray:
    return sol.eval_b(t)


def _solve_dense(system: TauSystem):
    A = system.matrix
    lu, piv, info = sla.lapack.dgetrf(A)
    if info > 0:
        raise SingularTauError(_singular_message(math.inf), math.inf)
    anorm = np.abs(A).sum(axis=0).max()
    rcond, _ = sla.lapack.dgecon(lu, anorm, norm="1")
    cond = math.inf if rcond == 0 else 1.0 / rcond
    if not cond < CONDITION_LIMIT:
        raise SingularTauError(_singular_message(cond), cond)
    x = sla.lu_solve((lu, piv), system.vector)
    return x.reshape(system.sys.M, system.basis.size), cond


class _SchurFactor:
    """Reusable solver for the proportional system ``S_j = s_j S_0``.

    ``S_0^-1 N = Q T Q^H`` and ``Psi = Q X`` turn the Galerkin rows into
    ``X P - T X Wt = R`` with ``P = sum s_j D_j Wt``, which is solved row by
    row from the bottom of the triangular ``T``.
    """

    def __init__(self, S0, scales, Nmat, Dmats, Wt, V):
        self.lu = sla.lu_factor(S0)
        self.T, self.Q = sla.schur(sla.lu_solve(self.lu, Nmat), output="complex")
        self.Wt = Wt
        P = sum(s * D @ Wt for s, D in zip(scales, Dmats))
        self.blocks = []
        self.condition = 1.0
        for r in range(len(Nmat)):
            block = np.concatenate([P - self.T[r, r] * Wt, V], axis=1)
            cond = np.linalg.cond(block)
            self.condition = max(self.condition, cond)
            if not cond < CONDITION_LIMIT:
                raise SingularTauError(_singular_message(cond), cond)
            self.blocks.append(sla.lu_factor(block.T))

    def solve(self, galerkin, init):
        """``Psi`` for Galerkin right-hand side ``(M, g)`` and initial data ``(M, m)``."""
        QH = self.Q.conj().T
        R = QH @ sla.lu_solve(self.lu, galerkin)
        I0 = QH @ init
        M = len(R)
        X = np.zeros((M, self.Wt.shape[0]), dtype=complex)
        for r in range(M - 1, -1, -1):
            rhs = R[r].copy()
            if r < M - 1:
                rhs += (self.T[r, r + 1:] @ X[r + 1:]) @ self.Wt
            X[r] = sla.lu_solve(self.blocks[r], np.concatenate([rhs, I0[r]]))
        return (self.Q @ X).real


def _schur_factor(system: TauSystem, common):
    S0, scales = common
    return _SchurFactor(S0, scales, system.sys.Nmat, system.Dmats, system.Wt, system.V)


def _solve_schur(system: TauSystem):
    fac = _schur_factor(system, _common_factor(system.sys.S))
    Psi = fac.solve(system.rhs, np.stack(system.sys.b_init, axis=1))
    return np.ascontiguousarray(Psi), fac.condition


def _nearest_proportional(S):
    """Least-squares ``S_j ~ s_j S_0`` with ``S_0`` the last matrix."""
    S0 = S[-1]
    ref = float(np.vdot(S0, S0))
    return S0, [float(np.vdot(S0, Sj)) / ref for Sj in S]


def _solve_iterative(system: TauSystem):
    from scipy.sparse.linalg import LinearOperator, gmres

    sys = system.sys
    M, n = sys.M, system.basis.size
    g = system.Wt.shape[1]
    fac = _schur_factor(system, _nearest_proportional(sys.S))
    SD = [(Sj, D @ system.Wt) for Sj, D in zip(sys.S, system.Dmats)]

    def apply(x):
        Psi = x.reshape(M, n)
        top = sum(Sj @ Psi @ DW for Sj, DW in SD) - sys.Nmat @ (Psi @ system.Wt)
        return np.concatenate([top, Psi @ system.V], axis=1).reshape(-1)

    def precondition(y):
        y = y.reshape(M, n)
        return fac.solve(y[:, :g], y[:, g:]).reshape(-1)

    size = M * n
    A = LinearOperator((size, size), matvec=apply, dtype=float)
    Minv = LinearOperator((size, size), matvec=precondition, dtype=float)
    b = system.vector
    x, info = gmres(A, b, M=Minv, rtol=GMRES_TOL, atol=0.0, restart=60, maxiter=20)
    if info != 0 or not np.linalg.norm(apply(x) - b) <= 1e-8 * np.linalg.norm(b):
        raise SingularTauError("iterative Tau solve did not converge; the system may be "
                               "singular or the proportional preconditioner too poor",
                               math.inf)
    return x.reshape(M, n), fac.condition


def _singular_message(cond):
    return (f"Tau system is numerically singular (condition {cond:.3e}); try a larger K "
            "or a smaller multiquadric shape parameter")


def solve_tau(system: TauSystem) -> TauSolution:
    """Solve the Tau system and report the sampled residual ``max |R(t)|``."""
    if system.method == "dense" and system.size > _DENSE_LIMIT:
        raise MemoryError(f"dense Tau system of size {system.size} exceeds {_DENSE_LIMIT}")
    solver = {"dense": _solve_dense, "schur": _solve_schur, "iterative": _solve_iterative}
    Psi, cond = solver[system.method](system)
    if not np.all(np.isfinite(Psi)):
        raise SingularTauError("non-finite Tau solution", math.inf)
    sys, basis = system.sys, system.basis
    q = 4 * basis.size
    ts = 0.5 * basis.L * (1.0 + np.cos(np.pi * (np.arange(q) + 0.5) / q))
    lead = sum(Sj @ Psi @ D for Sj, D in zip(sys.S, system.Dmats))
    R = (lead - sys.Nmat @ Psi - sys.f_coeffs) @ basis.basis_vector(ts)
    return TauSolution(Psi, basis, float(np.abs(R).max()), cond, system.method)
