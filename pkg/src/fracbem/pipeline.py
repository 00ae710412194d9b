"""End-to-end runs: geometry, operators, Tau solve, reconstruction and errors."""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import kernels
from .bem import (KINDS, BemOperators, NearBoundaryWarning, RbfSet, build_operators,
                  build_ode_system, default_shape_parameter, reconstruct_field)
from .chebyshev import ChebBasis
from .geometry import discretize_boundary, generate_interior_nodes, matched_interior_count
from .metrics import ErrorReport, error_norms
from .problems import ProblemSpec, get_problem
from .special import CaputoOrder
from .tau import TauSolution, assemble_tau_system, solve_tau

__all__ = ["ConfigError", "RunConfig", "RunResult", "Geometry", "build_geometry", "run",
           "SHAPE_FACTORS", "SHAPE_CONDITION_TARGET"]

#: Shape-factor ladder tried in order when ``rbf_c`` is not given.
SHAPE_FACTORS = (2.0, 1.0, 0.5, 0.25)
#: Largest accepted ``cond(U_00)`` while walking the ladder (a decade below
#: the abort threshold of the ODE assembly).
SHAPE_CONDITION_TARGET = 1e11
M_POLICIES = ("auto", "matched")


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Parameters of a single solve.

    ``M`` is the target number of interior nodes, or a policy: ``None`` or
    ``"auto"`` take the problem's default and ``"matched"`` picks the count
    whose grid spacing equals the mean boundary element length (so ``M``
    grows like ``N^2``). ``L`` defaults to the problem horizon and
    ``t_eval`` to its reporting time. ``derivatives`` lists extra ``pq``
    fields to report.
    """

    example: str = "1"
    case: str = "I"
    alpha: Optional[float] = None
    N: int = 80
    M: Union[int, str, None] = None
    K: int = 12
    L: Optional[float] = None
    t_eval: Optional[tuple] = None
    rbf_c: Optional[float] = None
    derivatives: tuple = ()
    tau_method: str = "auto"
    sampling: str = "graded"

    def problem(self) -> ProblemSpec:
        try:
            return get_problem(self.example, self.alpha, self.case)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def resolved(self, problem: Optional[ProblemSpec] = None) -> "RunConfig":
        """Fill defaults from the problem and validate."""
        problem = problem or self.problem()
        L = float(self.L) if self.L is not None else problem.L
        t_eval = self.t_eval if self.t_eval is not None else (problem.t_eval,)
        if np.isscalar(t_eval):
            t_eval = (t_eval,)
        cfg = replace(self, L=L, t_eval=tuple(float(t) for t in t_eval),
                      derivatives=tuple(self.derivatives))
        cfg.validate(problem)
        return replace(cfg, M=cfg.interior_count(problem))

    @property
    def M_policy(self) -> str:
        if self.M is None or self.M == "auto":
            return "auto"
        return self.M if isinstance(self.M, str) else "fixed"

    def interior_count(self, problem: ProblemSpec) -> int:
        policy = self.M_policy
        if policy == "auto":
            return problem.default_M
        if policy == "matched":
            return matched_interior_count(problem.curve, int(self.N))
        return int(self.M)

    def validate(self, problem: ProblemSpec) -> None:
        if int(self.N) != self.N or self.N < 8:
            raise ConfigError("N >= 8 boundary elements required")
        if isinstance(self.M, str):
            if self.M not in M_POLICIES:
                raise ConfigError(f"M must be an integer or one of {M_POLICIES}")
        elif self.M is not None and (int(self.M) != self.M or self.M < 4):
            raise ConfigError("M >= 4 interior nodes required")
        m = CaputoOrder(max(problem.orders)).m
        if int(self.K) != self.K or self.K < m:
            raise ConfigError(f"K >= ceil(alpha) = {m} required")
        if self.L is not None and not self.L > 0:
            raise ConfigError("L must be positive")
        if self.t_eval is not None and self.L is not None:
            for t in self.t_eval:
                if not 0 <= t <= self.L * (1 + 1e-12):
                    raise ConfigError(f"t_eval {t} outside [0, {self.L}]")
        if self.rbf_c is not None and not self.rbf_c > 0:
            raise ConfigError("rbf_c must be positive")
        bad = set(self.derivatives) - set(KINDS)
        if bad:
            raise ConfigError(f"unknown derivative selectors {sorted(bad)}")
        if self.tau_method not in ("auto", "dense", "schur", "iterative"):
            raise ConfigError("tau_method must be auto, dense, schur or iterative")
        if self.sampling not in ("graded", "discrete"):
            raise ConfigError("sampling must be graded or discrete")


@dataclass
class Geometry:
    """Reusable spatial discretisation and reduced operators.

    ``shape_factor`` is the ladder entry that produced ``c`` (``None`` when
    ``c`` was given explicitly).
    """

    ops: BemOperators
    warnings: list = field(default_factory=list)
    seconds: float = 0.0
    shape_factor: Optional[float] = None


def build_geometry(problem: ProblemSpec, N: int, M: int, rbf_c: Optional[float] = None) -> Geometry:
    """Mesh, interior nodes and reduced operators for ``problem``.

    Without ``rbf_c`` the multiquadric shape parameter is
    ``factor * diameter / sqrt(M)`` for the first factor of
    :data:`SHAPE_FACTORS` giving ``cond(U_00) < SHAPE_CONDITION_TARGET``;
    if none does, the last factor is kept and the later condition check
    reports the failure.
    """
    t0 = time.perf_counter()
    mesh = discretize_boundary(problem.curve, N)
    interior = generate_interior_nodes(problem.curve, M)
    d1, d2 = problem.delta_values(mesh.nodes)
    ladder = (None,) if rbf_c is not None else SHAPE_FACTORS
    notes = []
    for factor in ladder:
        c = rbf_c if factor is None else default_shape_parameter(
            problem.curve.diameter(), interior.M, factor)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NearBoundaryWarning)
            ops = build_operators(mesh, interior, RbfSet(interior.points, c), d1, d2)
        if factor is None or ops.condition["U00"] < SHAPE_CONDITION_TARGET:
            break
        notes.append(f"shape factor {factor:g} rejected: cond(U00) = {ops.condition['U00']:.3e}")
    msgs = notes + [str(w.message) for w in caught if issubclass(w.category, NearBoundaryWarning)]
    return Geometry(ops, msgs, time.perf_counter() - t0, factor)


@dataclass
class RunResult:
    config: RunConfig
    problem: ProblemSpec
    geometry: Geometry
    basis: ChebBasis
    solution: TauSolution
    fields: dict            # t -> pq -> approx values at interior nodes
    exact: dict             # t -> pq -> exact values (empty without exact solution)
    errors: dict            # t -> pq -> ErrorReport
    timings: dict
    M_policy: str = "fixed"

    @property
    def ops(self) -> BemOperators:
        return self.geometry.ops

    def b(self, t: float) -> np.ndarray:
        return self.solution.eval_b(t)

    def metadata(self) -> dict:
        ops = self.ops
        return {
            "problem": self.problem.name,
            "orders": list(self.problem.orders),
            "config": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in asdict(self.config).items()},
            "N": ops.mesh.N,
            "M": ops.interior.M,
            "M_policy": self.M_policy,
            "rbf_c": ops.rbf.c,
            "shape_factor": self.geometry.shape_factor,
            "condition": {**ops.condition, "tau": self.solution.condition},
            "tau_method": self.solution.method,
            "tau_residual": self.solution.residual_norm,
            "kernel_backend": kernels.BACKEND,
            "deviations": list(self.problem.deviations),
            "warnings": list(self.geometry.warnings),
            "timings": self.timings,
        }


def run(config: RunConfig, geometry: Optional[Geometry] = None,
        problem: Optional[ProblemSpec] = None) -> RunResult:
    """Solve one configuration; ``geometry`` may be shared between runs that
    differ only in ``K``, ``L`` or ``t_eval``."""
    problem = problem or config.problem()
    cfg = config.resolved(problem)
    if geometry is None:
        geometry = build_geometry(problem, cfg.N, cfg.M, cfg.rbf_c)
    ops = geometry.ops
    basis = ChebBasis(cfg.L, cfg.K)
    t0 = time.perf_counter()
    ode = build_ode_system(problem, ops, basis, cfg.sampling)
    t1 = time.perf_counter()
    sol = solve_tau(assemble_tau_system(ode, basis, cfg.tau_method))
    t2 = time.perf_counter()
    kinds = ("00",) + tuple(k for k in cfg.derivatives if k != "00")
    X, Y = ops.interior.points[:, 0], ops.interior.points[:, 1]
    fields, exact, errors = {}, {}, {}
    for t in cfg.t_eval:
        fields[t] = {k: reconstruct_field(ops, sol, t, k, problem=problem) for k in kinds}
        if problem.exact is not None:
            exact[t] = {k: np.asarray(problem.exact(X, Y, t, k), dtype=float) * np.ones_like(X)
                        for k in kinds}
            errors[t] = {k: error_norms(exact[t][k], fields[t][k]) for k in kinds}
    timings = {"geometry": geometry.seconds, "ode": t1 - t0, "tau": t2 - t1}
    return RunResult(cfg, problem, geometry, basis, sol, fields, exact, errors, timings,
                     config.M_policy)
