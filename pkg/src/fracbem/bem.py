"""Boundary-element / dual-reciprocity operators for the Poisson-type problem.

Conventions
-----------
``u* = ln r / 2 pi`` with ``r = |y - x|``, ``x`` the collocation point and
``y`` the integration point; ``u_n* = (y - x).n / (2 pi r^2)``. Assembled
operators satisfy

    H u = G u_n + Abar b                    (boundary nodes)
    u_pq(x_i) = Hhat_pq u + Ghat_pq u_n + Ahat_pq b   (interior points)

with ``pq`` one of ``00, x, y, xx, xy, yy`` (derivatives in ``x``) and ``b``
the coefficients of the multiquadric expansion of the Laplacian of ``u``.
Elements are straight with the node at the midpoint (constant elements).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import scipy.linalg as sla

from . import _kernels_py
from .geometry import BoundaryMesh, InteriorNodes
from .kernels import integrate_elements

__all__ = [
    "KINDS",
    "NearBoundaryWarning",
    "SingularOperatorError",
    "RbfSet",
    "BemOperators",
    "ReducedOdeSystem",
    "kernel",
    "kernel_derivs",
    "condition_estimate",
    "multiquadric_particular",
    "default_shape_parameter",
    "assemble_HG",
    "assemble_domain_ops",
    "reduce_boundary",
    "build_operators",
    "field_maps",
    "build_ode_system",
    "reconstruct_field",
    "evaluate_extra_points",
]

KINDS = ("00", "x", "y", "xx", "xy", "yy")
GAUSS_COARSE = 8
GAUSS_FINE = 32
NEAR_FACTOR = 1.0
_SELF_POINTS = 16


class NearBoundaryWarning(UserWarning):
    """An evaluation point is within one element length of the boundary."""


class SingularOperatorError(np.linalg.LinAlgError):
    """A reduced operator is numerically singular."""

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


def _rules():
    return (np.polynomial.legendre.leggauss(GAUSS_COARSE),
            np.polynomial.legendre.leggauss(GAUSS_FINE))


# --------------------------------------------------------------------------
# kernels and the multiquadric particular solution
# --------------------------------------------------------------------------

def kernel(r):
    """``u*(r) = ln(r) / 2 pi``; ``r`` must be positive."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("kernel is singular at r = 0; use the singular-element integral")
    return np.log(r) / (2.0 * np.pi)


def kernel_derivs(source, field, normal) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """``u*`` and ``u_n*`` with their derivatives in the field point.

    Parameters
    ----------
    source : (..., 2) integration points on the boundary, carrying ``normal``.
    field : (..., 2) evaluation points (the variable being differentiated).
    normal : (..., 2) unit normal at ``source``.

    Returns
    -------
    dict mapping ``pq`` in :data:`KINDS` to ``(u*_pq, u_n*_pq)``.
    """
    source, field, normal = (np.asarray(a, dtype=float) for a in (source, field, normal))
    r1 = source[..., 0] - field[..., 0]
    r2 = source[..., 1] - field[..., 1]
    if np.any(r1 * r1 + r2 * r2 == 0):
        raise ValueError("coincident source and field points")
    us, un = _kernels_py._kernels(r1, r2, normal[..., 0], normal[..., 1], len(KINDS))
    return {k: (us[i], un[i]) for i, k in enumerate(KINDS)}


def multiquadric_particular(r, c: float):
    """Particular solution ``u`` of ``lap u = sqrt(r^2 + c^2)`` and ``u_r, u_rr``."""
    if not c > 0:
        raise ValueError("shape parameter must be positive")
    r = np.asarray(r, dtype=float)
    s = np.sqrt(r * r + c * c)
    u = (4 * c * c + r * r) * s / 9.0 - c ** 3 / 3.0 * np.log(c + s)
    g = (s * s + s * c + c * c) / (3.0 * (c + s))   # u_r / r
    h = (s + 2 * c) / (3.0 * (c + s) ** 2)          # (u_rr - u_r / r) / r^2
    return u, g * r, g + h * r * r


@dataclass(frozen=True)
class RbfSet:
    """Multiquadric basis ``f_j = sqrt(|x - x_j|^2 + c^2)`` centred at interior nodes."""

    centers: np.ndarray
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("multiquadric shape parameter must be positive")
        object.__setattr__(self, "centers", np.asarray(self.centers, dtype=float))

    @property
    def M(self) -> int:
        return len(self.centers)

    def _offsets(self, points):
        points = np.asarray(points, dtype=float)
        d = points[..., None, :] - self.centers
        rr = (d * d).sum(-1)
        return d, rr, np.sqrt(rr + self.c * self.c)

    def basis(self, points) -> np.ndarray:
        """``f_j(points)``, shape ``(..., M)``."""
        return self._offsets(points)[2]

    def interpolation_matrix(self) -> np.ndarray:
        F = self.basis(self.centers)
        return 0.5 * (F + F.T)

    def particular(self, points, kinds=KINDS) -> dict[str, np.ndarray]:
        """``u_j`` and its derivatives at ``points``; each value ``(..., M)``."""
        c = self.c
        d, rr, s = self._offsets(points)
        out = {}
        if "00" in kinds:
            out["00"] = (4 * c * c + rr) * s / 9.0 - c ** 3 / 3.0 * np.log(c + s)
        if not set(kinds) - {"00"}:
            return out
        g = (s * s + s * c + c * c) / (3.0 * (c + s))
        h = (s + 2 * c) / (3.0 * (c + s) ** 2)
        dx, dy = d[..., 0], d[..., 1]
        derivs = {"x": g * dx, "y": g * dy, "xx": g + h * dx * dx, "xy": h * dx * dy,
                  "yy": g + h * dy * dy}
        out.update({k: v for k, v in derivs.items() if k in kinds})
        return out

    def normal_derivative(self, points, normals) -> np.ndarray:
        """``du_j/dn`` at boundary ``points`` with unit ``normals``, shape ``(..., M)``."""
        c = self.c
        d, rr, s = self._offsets(points)
        g = (s * s + s * c + c * c) / (3.0 * (c + s))
        normals = np.asarray(normals, dtype=float)
        return g * (d * normals[..., None, :]).sum(-1)


SHAPE_FACTOR = 2.0


def default_shape_parameter(diameter: float, M: int, factor: float = SHAPE_FACTOR) -> float:
    """``c = factor * diameter / sqrt(M)``.

    ``factor = 2`` keeps ``cond(U_00)`` near ``1e10`` on regular node sets;
    doubling it overflows the ``1e12`` limit of :func:`build_ode_system`.
    """
    return factor * diameter / math.sqrt(M)


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------

def _own_log_integral(lengths):
    """``int u* dGamma`` over the element containing the collocation node."""
    return lengths / (2.0 * np.pi) * (np.log(lengths / 2.0) - 1.0)


def _quadrature_points(mesh: BoundaryMesh, xg):
    mid = 0.5 * (mesh.starts + mesh.ends)
    half = 0.5 * (mesh.ends - mesh.starts)
    return mid[:, None, :] + xg[None, :, None] * half[:, None, :]


def _rbf_on_rules(mesh, rbf, rules):
    if rbf is None:
        empty = np.zeros((mesh.N, 1, 0))
        return (empty, empty), (empty, empty)
    uh, qh = [], []
    for xg, _ in rules:
        ys = _quadrature_points(mesh, xg)
        uh.append(rbf.particular(ys, ("00",))["00"])
        qh.append(rbf.normal_derivative(ys, np.broadcast_to(mesh.normals[:, None, :], ys.shape)))
    return tuple(uh), tuple(qh)


def condition_estimate(A) -> float:
    """1-norm condition estimate from an LU factorisation (``inf`` if singular)."""
    A = np.asarray(A, dtype=float)
    lu, piv, info = sla.lapack.dgetrf(A)
    if info > 0:
        return math.inf
    rcond, _ = sla.lapack.dgecon(lu, np.abs(A).sum(axis=0).max(), norm="1")
    return math.inf if rcond == 0 else float(1.0 / rcond)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError("non-finite boundary-element quadrature")


def assemble_HG(mesh: BoundaryMesh) -> tuple[np.ndarray, np.ndarray]:
    """Boundary matrices ``H`` and ``G`` of ``H u = G u_n + Abar b``.

    ``H_ii`` absorbs the free term through ``H 1 = 0`` and ``G_ii`` is the
    analytic logarithmic integral over the node's own element.
    """
    rules = _rules()
    (uh, qh) = _rbf_on_rules(mesh, None, rules)
    Gt, Ht, _ = integrate_elements(mesh.nodes, mesh.starts, mesh.ends, mesh.normals,
                                   mesh.lengths, np.arange(mesh.N), 1, NEAR_FACTOR,
                                   rules, uh, qh)
    _check_finite(Gt, Ht)
    H = -Ht[:, :, 0]
    np.fill_diagonal(H, 0.0)
    np.fill_diagonal(H, -H.sum(axis=1))
    G = -Gt[:, :, 0]
    np.fill_diagonal(G, -_own_log_integral(mesh.lengths))
    return H, G


def _own_element_drm(mesh: BoundaryMesh, rbf: RbfSet) -> np.ndarray:
    """``int_{own element} u* du_j/dn`` for every boundary node, ``(N, M)``.

    ``u_n*`` vanishes on the flat own element; the log singularity is
    subtracted and the smooth remainder integrated with ``s = (l/2) v^2``.
    """
    ell = mesh.lengths
    tang = (mesh.ends - mesh.starts) / ell[:, None]
    v, w = np.polynomial.legendre.leggauss(_SELF_POINTS)
    v, w = 0.5 * (v + 1.0), 0.5 * w
    s = (0.5 * ell)[:, None] * v[None, :] ** 2           # (N, Q) distance from node
    ds = ell[:, None] * v[None, :] * w[None, :]          # ds = l v dv
    normals = mesh.normals
    q0 = rbf.normal_derivative(mesh.nodes, normals)      # (N, M)
    total = q0 * _own_log_integral(ell)[:, None]
    for sign in (1.0, -1.0):
        ys = mesh.nodes[:, None, :] + sign * s[..., None] * tang[:, None, :]
        q = rbf.normal_derivative(ys, np.broadcast_to(normals[:, None, :], ys.shape))
        total += np.einsum("nq,nqm->nm", np.log(s) * ds / (2.0 * np.pi), q - q0[:, None, :])
    return total


@dataclass(frozen=True)
class BemOperators:
    """Assembled operators for one boundary mesh, interior set and RBF basis.

    ``U`` and ``Cmap`` are filled in by :func:`reduce_boundary` (they depend
    on the boundary-condition coefficients).
    """

    mesh: BoundaryMesh
    interior: InteriorNodes
    rbf: RbfSet
    H: np.ndarray
    G: np.ndarray
    Abar: np.ndarray
    Hhat: Mapping[str, np.ndarray]
    Ghat: Mapping[str, np.ndarray]
    Ahat: Mapping[str, np.ndarray]
    U: Mapping[str, np.ndarray] = field(default_factory=dict)
    Cmap: Mapping[str, np.ndarray] = field(default_factory=dict)
    boundary_maps: Optional[tuple] = None
    delta1: Optional[np.ndarray] = None
    delta2: Optional[np.ndarray] = None
    condition: Mapping[str, float] = field(default_factory=dict)

    @property
    def reduced(self) -> bool:
        return bool(self.U)


def _interior_rows(mesh, rbf, points, warn=True):
    """``Hhat, Ghat, Ahat`` rows for arbitrary interior points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dist = mesh.distance(points)
    close = dist < NEAR_FACTOR * mesh.lengths.max()
    if warn and np.any(close):
        warnings.warn(f"{int(close.sum())} evaluation point(s) within one element length of "
                      "the boundary; near-singular rule used", NearBoundaryWarning, stacklevel=3)
    rules = _rules()
    uh, qh = _rbf_on_rules(mesh, rbf, rules)
    Gt, Ht, At = integrate_elements(points, mesh.starts, mesh.ends, mesh.normals, mesh.lengths,
                                    -np.ones(len(points), dtype=np.int64), len(KINDS),
                                    NEAR_FACTOR, rules, uh, qh)
    _check_finite(Gt, Ht, At)
    part = rbf.particular(points)
    Hhat = {k: np.ascontiguousarray(Ht[:, :, i]) for i, k in enumerate(KINDS)}
    Ghat = {k: -np.ascontiguousarray(Gt[:, :, i]) for i, k in enumerate(KINDS)}
    Ahat = {k: part[k] + At[:, :, i] for i, k in enumerate(KINDS)}
    return Hhat, Ghat, Ahat


def assemble_domain_ops(mesh: BoundaryMesh, interior: InteriorNodes, rbf: RbfSet):
    """Dual-reciprocity matrices ``(Abar, Ahat, Hhat, Ghat)``.

    ``Abar`` is ``N x M``; ``Ahat[pq]`` is ``M x M`` and ``Hhat[pq]``,
    ``Ghat[pq]`` are ``M x N`` for every ``pq`` in :data:`KINDS`.
    """
    if not np.all(mesh.contains(interior.points)):
        raise ValueError("interior nodes must lie strictly inside the boundary")
    rules = _rules()
    uh, qh = _rbf_on_rules(mesh, rbf, rules)
    _, _, Ab = integrate_elements(mesh.nodes, mesh.starts, mesh.ends, mesh.normals,
                                  mesh.lengths, np.arange(mesh.N), 1, NEAR_FACTOR,
                                  rules, uh, qh)
    _check_finite(Ab)
    Abar = 0.5 * rbf.particular(mesh.nodes, ("00",))["00"] + Ab[:, :, 0] \
        + _own_element_drm(mesh, rbf)
    Hhat, Ghat, Ahat = _interior_rows(mesh, rbf, interior.points)
    return Abar, Ahat, Hhat, Ghat


def _diag(v, n, name):
    v = np.asarray(v, dtype=float)
    if v.ndim == 2:
        if not np.allclose(v, np.diag(np.diag(v))):
            raise ValueError(f"{name} must be diagonal")
        v = np.diag(v)
    return np.broadcast_to(v, (n,)).copy()


def _boundary_maps(H, G, Abar, d1, d2):
    """``(Pu, Qu, Pun, Qun)`` with ``u = Pu b + Qu h`` and ``u_n = Pun b + Qun h``."""
    N = len(H)
    cond = {}
    if np.all(d2 == 0):
        if np.any(d1 == 0):
            raise SingularOperatorError("delta1 vanishes where delta2 does", math.inf)
        cond["G"] = condition_estimate(G)
        lu = sla.lu_factor(G)
        Qu = np.diag(1.0 / d1)
        Pu = np.zeros_like(Abar)
        Pun = -sla.lu_solve(lu, Abar)
        Qun = sla.lu_solve(lu, H * (1.0 / d1)[None, :])
    else:
        Z = np.block([[H, -G], [np.diag(d1), np.diag(d2)]])
        cond["Z"] = condition_estimate(Z)
        if not cond["Z"] < 1e14:
            raise SingularOperatorError("boundary system is singular", cond["Z"])
        rhs = np.zeros((2 * N, Abar.shape[1] + N))
        rhs[:N, :Abar.shape[1]] = Abar
        rhs[N:, Abar.shape[1]:] = np.eye(N)
        X = np.linalg.solve(Z, rhs)
        M = Abar.shape[1]
        Pu, Qu = X[:N, :M], X[:N, M:]
        Pun, Qun = X[N:, :M], X[N:, M:]
    return (Pu, Qu, Pun, Qun), cond


def field_maps(Hhat, Ghat, Ahat, boundary_maps):
    """Eliminate ``u, u_n``: returns ``U[pq], Cmap[pq]`` for the given rows."""
    Pu, Qu, Pun, Qun = boundary_maps
    if np.any(Pu):
        U = {k: Ahat[k] + Hhat[k] @ Pu + Ghat[k] @ Pun for k in Hhat}
    else:   # Dirichlet data: u carries no b-dependence
        U = {k: Ahat[k] + Ghat[k] @ Pun for k in Hhat}
    C = {k: Hhat[k] @ Qu + Ghat[k] @ Qun for k in Hhat}
    return U, C


def reduce_boundary(ops: BemOperators, delta1, delta2) -> BemOperators:
    """Eliminate boundary unknowns for ``delta1 u + delta2 u_n = h``.

    With ``delta2 = 0`` only ``G`` is factorised (``u_n = G^-1 (H u - Abar b)``);
    otherwise the coupled ``2N`` system ``[[H, -G], [delta1, delta2]]`` is
    solved. ``delta1, delta2`` are diagonal matrices or their diagonals.
    """
    N = ops.mesh.N
    d1, d2 = _diag(delta1, N, "delta1"), _diag(delta2, N, "delta2")
    maps, cond = _boundary_maps(ops.H, ops.G, ops.Abar, d1, d2)
    U, C = field_maps(ops.Hhat, ops.Ghat, ops.Ahat, maps)
    cond["U00"] = condition_estimate(U["00"])
    return BemOperators(ops.mesh, ops.interior, ops.rbf, ops.H, ops.G, ops.Abar,
                        ops.Hhat, ops.Ghat, ops.Ahat, U, C, maps, d1, d2,
                        {**ops.condition, **cond})


def build_operators(mesh: BoundaryMesh, interior: InteriorNodes, rbf: RbfSet,
                    delta1=1.0, delta2=0.0) -> BemOperators:
    """Assemble and reduce in one call."""
    H, G = assemble_HG(mesh)
    Abar, Ahat, Hhat, Ghat = assemble_domain_ops(mesh, interior, rbf)
    ops = BemOperators(mesh, interior, rbf, H, G, Abar, Hhat, Ghat, Ahat,
                       condition={"G": condition_estimate(G)})
    return reduce_boundary(ops, delta1, delta2)


# --------------------------------------------------------------------------
# ODE system and field reconstruction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedOdeSystem:
    """``sum_j S_j D^{alpha_j} b = Nmat b + f(t)`` with ``b^(i)(0) = b_init[i]``.

    ``f_coeffs`` holds the Chebyshev coefficients of ``f`` (``M x (K+1)``).
    """

    S: tuple
    Nmat: np.ndarray
    f_coeffs: np.ndarray
    b_init: tuple
    orders: tuple
    m: int

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.orders, self.orders[1:])):
            raise ValueError("fractional orders must be strictly increasing")
        if len(self.S) != len(self.orders):
            raise ValueError("one S matrix per order is required")
        if len(self.b_init) != self.m:
            raise ValueError(f"{self.m} initial vectors required")

    @property
    def M(self) -> int:
        return self.Nmat.shape[0]


def _projected(basis, fn, x, y, sampling):
    """Chebyshev coefficients of ``fn(x, y, t)`` per point (rows)."""
    if sampling == "discrete":
        tq = basis.projection_nodes()
        return basis.project_samples(fn(x[:, None], y[:, None], tq[None, :]))
    tq, C = basis.projection_rule()
    vals = fn(x[:, None], y[:, None], tq[None, :])
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite value in projection samples")
    return vals @ C.T


def build_ode_system(problem, ops: BemOperators, basis, sampling: str = "graded") -> ReducedOdeSystem:
    """Collocate the PDE at the interior nodes.

    Parameters
    ----------
    problem : ProblemSpec
    ops : reduced :class:`BemOperators`
    basis : ChebBasis on ``(0, L)``
    sampling : ``"graded"`` (default) projects ``g`` and ``h`` with the
        graded quadrature of :meth:`ChebBasis.projection_rule`;
        ``"discrete"`` uses the ``2K+2`` Chebyshev-Gauss samples.
    """
    if not ops.reduced:
        raise ValueError("operators must be reduced first (reduce_boundary)")
    if sampling not in ("graded", "discrete"):
        raise ValueError("sampling must be 'graded' or 'discrete'")
    U00 = ops.U["00"]
    cond = ops.condition.get("U00", condition_estimate(U00))
    if not cond < 1e12:
        raise SingularOperatorError(
            f"U_00 is numerically singular (condition {cond:.3e}); reduce the "
            "multiquadric shape parameter or change M", cond)
    X, Y = ops.interior.points[:, 0], ops.interior.points[:, 1]
    coef = problem.coefficients(X, Y)
    orders = tuple(problem.orders)
    gam = [problem.gamma_values(j, X, Y) for j in range(len(orders))]
    S = tuple(gj[:, None] * U00 for gj in gam)
    # d_xy enters the operator as 2 B u_xy
    weights = {"xx": coef["A"], "xy": 2.0 * coef["B"], "yy": coef["C"],
               "x": coef["D"], "y": coef["E"], "00": coef["F"]}
    Nmat = sum(w[:, None] * ops.U[k] for k, w in weights.items())
    Ncmap = sum(w[:, None] * ops.Cmap[k] for k, w in weights.items())

    nodes = ops.mesh.nodes
    Hc = _projected(basis, problem.boundary_values, nodes[:, 0], nodes[:, 1], sampling)
    Gc = _projected(basis, problem.source_values, X, Y, sampling)
    C00 = ops.Cmap["00"]
    frac_h = sum(gj[:, None] * (C00 @ (Hc @ basis.fractional_matrix(a)))
                 for gj, a in zip(gam, orders))
    f_coeffs = Ncmap @ Hc + Gc - frac_h

    phi0 = basis.basis_vector(0.0)
    m = max(math.ceil(a - 1e-14) for a in orders)
    lu = sla.lu_factor(U00)
    b_init = []
    for i in range(m):
        di = problem.initial_values(i, X, Y)
        ci = C00 @ (Hc @ (basis.integer_matrix(i) @ phi0))
        b_init.append(sla.lu_solve(lu, di - ci))
    return ReducedOdeSystem(S, Nmat, f_coeffs, tuple(b_init), orders, m)


def reconstruct_field(ops: BemOperators, sol, t, pq: str = "00", problem=None, h=None) -> np.ndarray:
    """``U_pq b(t) + Cmap_pq h(t)`` at the interior nodes.

    ``h`` (boundary values at the nodes at time ``t``) may be passed
    directly; otherwise it is taken from ``problem``. With neither, the
    boundary data are treated as zero.
    """
    if pq not in KINDS:
        raise ValueError(f"pq must be one of {KINDS}")
    b = sol.eval_b(t)
    out = ops.U[pq] @ b
    hv = _boundary_at(ops, t, problem, h)
    if hv is not None:
        out = out + ops.Cmap[pq] @ hv
    return out


def _boundary_at(ops, t, problem, h):
    if h is not None:
        return np.asarray(h, dtype=float)
    if problem is None:
        return None
    nodes = ops.mesh.nodes
    return np.asarray(problem.boundary_values(nodes[:, 0], nodes[:, 1], float(t)), dtype=float) \
        * np.ones(len(nodes))


def evaluate_extra_points(ops: BemOperators, sol, points, t, pq: str = "00",
                          problem=None, h=None) -> np.ndarray:
    """Field (or derivative ``pq``) at arbitrary interior ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if not np.all(ops.mesh.contains(points)):
        raise ValueError("evaluation points must lie strictly inside the boundary")
    if pq not in KINDS:
        raise ValueError(f"pq must be one of {KINDS}")
    Hhat, Ghat, Ahat = _interior_rows(ops.mesh, ops.rbf, points)
    sel = {pq: Hhat[pq]}
    U, C = field_maps(sel, {pq: Ghat[pq]}, {pq: Ahat[pq]}, ops.boundary_maps)
    out = U[pq] @ sol.eval_b(t)
    hv = _boundary_at(ops, t, problem, h)
    if hv is not None:
        out = out + C[pq] @ hv
    return out
