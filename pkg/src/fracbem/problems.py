"""Benchmark problems with closed-form solutions and a manufactured-solution builder.

A problem is

    sum_j gamma_j(x) D^{alpha_j} u = A u_xx + 2 B u_xy + C u_yy + D u_x + E u_y + F u + g

on a planar region, with ``delta1 u + delta2 u_n = h`` on the boundary and
``d^i u / dt^i (x, 0) = d_i(x)`` for ``i < ceil(alpha_max)``.

Exact solutions are sums of separable terms ``X(x, y) T(t)``; spatial
factors are written in sympy and differentiated symbolically, temporal
factors are small classes that know their own Caputo derivatives.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import sympy as sp

from .geometry import BoundaryCurve, Rectangle, example5_curve, square01
from .special import (CaputoOrder, caputo_power, caputo_quadrature, mittag_leffler,
                      mittag_leffler_time_derivative)

__all__ = [
    "SpatialField",
    "TimeFunction",
    "PowerSeries",
    "MittagLefflerDecay",
    "Hyperbolic",
    "ExactSolution",
    "ProblemSpec",
    "example1",
    "example2",
    "example3",
    "example4",
    "example5",
    "manufactured",
    "get_problem",
    "residual",
]

xs, ys = sp.symbols("x y", real=True)
_COEFF_NAMES = ("A", "B", "C", "D", "E", "F")
_DERIVS = {"00": (), "x": (xs,), "y": (ys,), "xx": (xs, xs), "xy": (xs, ys), "yy": (ys, ys)}

Scalar = Union[float, Callable]


def _broadcast(value, x, y):
    shape = np.broadcast_shapes(np.shape(x), np.shape(y))
    return np.broadcast_to(np.asarray(value, dtype=float), shape).copy()


class SpatialField:
    """A function of ``(x, y)`` given by a sympy expression, with derivatives."""

    def __init__(self, expr, name: str = ""):
        self.expr = sp.sympify(expr)
        self.name = name or str(self.expr)
        self._f = {k: sp.lambdify((xs, ys), sp.diff(self.expr, *v) if v else self.expr, "numpy")
                   for k, v in _DERIVS.items()}

    def __call__(self, x, y, pq: str = "00"):
        return _broadcast(self._f[pq](np.asarray(x, float), np.asarray(y, float)), x, y)

    def derivative_expr(self, pq: str):
        v = _DERIVS[pq]
        return sp.diff(self.expr, *v) if v else self.expr

    def __repr__(self):
        return f"SpatialField({self.name})"


class TimeFunction:
    """Scalar function of time with classical and Caputo derivatives."""

    def __call__(self, t):
        return self.derivative(t, 0)

    def derivative(self, t, n: int):
        raise NotImplementedError

    def caputo(self, t, alpha: float):
        raise NotImplementedError

    def initial(self, n: int) -> float:
        """``n``-th derivative at ``t = 0``."""
        raise NotImplementedError


@dataclass(frozen=True)
class PowerSeries(TimeFunction):
    """Finite sum ``sum c_k t^{beta_k}`` with non-negative exponents."""

    terms: tuple  # ((coef, exponent), ...)

    def derivative(self, t, n: int):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, beta in self.terms:
            if float(beta).is_integer() and beta < n:
                continue
            coef = c * math.prod(beta - i for i in range(n))
            with np.errstate(divide="ignore"):
                out = out + coef * t ** (beta - n)
        return out

    def caputo(self, t, alpha: float):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, beta in self.terms:
            coef, expo = caputo_power(alpha, beta)
            if coef:
                out = out + c * coef * t ** expo
        return out

    def initial(self, n: int) -> float:
        total = 0.0
        for c, beta in self.terms:
            if beta == n:
                total += c * math.factorial(n)
            elif beta < n and not float(beta).is_integer():
                raise ValueError(f"t^{beta} has no finite derivative of order {n} at 0")
        return total


@dataclass(frozen=True)
class MittagLefflerDecay(TimeFunction):
    """``E_alpha(lam t^alpha)``; its Caputo derivative of order ``alpha`` is ``lam`` times itself."""

    alpha: float
    lam: float

    def derivative(self, t, n: int):
        return mittag_leffler_time_derivative(self.alpha, self.lam, t, n)

    def caputo(self, t, alpha: float):
        if abs(alpha - self.alpha) > 1e-14:
            raise NotImplementedError("closed form only for the matching order")
        return self.lam * mittag_leffler(self.alpha, self.lam * np.asarray(t, float) ** self.alpha)

    def initial(self, n: int) -> float:
        if n == 0:
            return 1.0
        if abs(self.alpha - 1.0) < 1e-14:
            return self.lam ** n
        if self.alpha > n:
            return 0.0
        raise ValueError(f"E_alpha(lam t^alpha) has no finite derivative of order {n} at 0")


@dataclass(frozen=True)
class Hyperbolic(TimeFunction):
    """``cosh t`` or ``sinh t``; Caputo derivatives by termwise differentiation."""

    kind: str
    terms: int = 40

    def __post_init__(self):
        if self.kind not in ("cosh", "sinh"):
            raise ValueError("kind must be 'cosh' or 'sinh'")

    def derivative(self, t, n: int):
        t = np.asarray(t, dtype=float)
        even = (self.kind == "cosh") == (n % 2 == 0)
        return np.cosh(t) if even else np.sinh(t)

    def caputo(self, t, alpha: float):
        order = CaputoOrder(alpha)
        if order.is_integer:
            return self.derivative(t, order.m)
        t = np.asarray(t, dtype=float)
        start = 0 if self.kind == "cosh" else 1
        out = np.zeros_like(t)
        for k in range(start, 2 * self.terms, 2):
            coef, expo = caputo_power(order, k)
            if coef:
                out = out + coef / math.factorial(k) * t ** expo
        return out

    def initial(self, n: int) -> float:
        return float(self.derivative(0.0, n))


@dataclass(frozen=True)
class ExactSolution:
    """``u = sum X_k(x, y) T_k(t)``."""

    terms: tuple  # ((SpatialField, TimeFunction), ...)

    def __call__(self, x, y, t, pq: str = "00"):
        return sum(X(x, y, pq) * T(t) for X, T in self.terms)

    def time_derivative(self, x, y, t, n: int):
        return sum(X(x, y) * T.derivative(t, n) for X, T in self.terms)

    def caputo(self, x, y, t, alpha: float):
        return sum(X(x, y) * T.caputo(t, alpha) for X, T in self.terms)

    def initial(self, x, y, n: int):
        return sum(X(x, y) * T.initial(n) for X, T in self.terms)


def _field_values(f: Scalar, x, y):
    if callable(f):
        return _broadcast(f(np.asarray(x, float), np.asarray(y, float)), x, y)
    return _broadcast(f, x, y)


@dataclass(frozen=True)
class ProblemSpec:
    """One instance of the multi-term time-fractional problem.

    ``coeffs`` maps ``A..F`` to constants or callables of ``(x, y)``;
    ``B`` multiplies ``2 u_xy``. ``source`` and ``boundary`` are callables of
    ``(x, y, t)`` that broadcast over their arguments.
    """

    name: str
    curve: BoundaryCurve
    orders: tuple
    gammas: tuple
    coeffs: dict
    source: Callable
    boundary: Callable
    initial: tuple
    L: float
    delta1: Scalar = 1.0
    delta2: Scalar = 0.0
    exact: Optional[ExactSolution] = None
    deviations: tuple = ()
    default_M: int = 100
    t_eval: float = 1.0

    def __post_init__(self):
        orders = tuple(float(a) for a in self.orders)
        if not orders or any(a <= 0 for a in orders):
            raise ValueError("orders must be positive")
        if any(b <= a for a, b in zip(orders, orders[1:])):
            raise ValueError("orders must be strictly increasing")
        if len(self.gammas) != len(orders):
            raise ValueError("one gamma field per order is required")
        object.__setattr__(self, "orders", orders)
        if len(self.initial) != self.m:
            raise ValueError(f"{self.m} initial-data fields required, got {len(self.initial)}")
        unknown = set(self.coeffs) - set(_COEFF_NAMES)
        if unknown:
            raise ValueError(f"unknown coefficient names {sorted(unknown)}")
        if not self.L > 0:
            raise ValueError("horizon L must be positive")

    @property
    def m(self) -> int:
        return CaputoOrder(max(self.orders)).m

    def coefficients(self, x, y) -> dict[str, np.ndarray]:
        return {k: _field_values(self.coeffs.get(k, 0.0), x, y) for k in _COEFF_NAMES}

    def gamma_values(self, j: int, x, y) -> np.ndarray:
        return _field_values(self.gammas[j], x, y)

    def source_values(self, x, y, t) -> np.ndarray:
        shape = np.broadcast_shapes(np.shape(x), np.shape(y), np.shape(t))
        return np.broadcast_to(self.source(x, y, t), shape).astype(float)

    def boundary_values(self, x, y, t) -> np.ndarray:
        shape = np.broadcast_shapes(np.shape(x), np.shape(y), np.shape(t))
        return np.broadcast_to(self.boundary(x, y, t), shape).astype(float)

    def initial_values(self, i: int, x, y) -> np.ndarray:
        return _field_values(self.initial[i], x, y)

    def delta_values(self, points) -> tuple[np.ndarray, np.ndarray]:
        x, y = points[:, 0], points[:, 1]
        return _field_values(self.delta1, x, y), _field_values(self.delta2, x, y)


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------

def _operator_on(X: SpatialField, coeffs: dict, x, y):
    """``A X_xx + 2 B X_xy + C X_yy + D X_x + E X_y + F X``."""
    c = {k: _field_values(coeffs.get(k, 0.0), x, y) for k in _COEFF_NAMES}
    return (c["A"] * X(x, y, "xx") + 2.0 * c["B"] * X(x, y, "xy") + c["C"] * X(x, y, "yy")
            + c["D"] * X(x, y, "x") + c["E"] * X(x, y, "y") + c["F"] * X(x, y))


def _manufactured_source(exact: ExactSolution, orders, gammas, coeffs):
    def g(x, y, t):
        total = 0.0
        for X, T in exact.terms:
            lhs = sum(_field_values(gj, x, y) * T.caputo(t, a) for gj, a in zip(gammas, orders))
            total = total + X(x, y) * lhs - T(t) * _operator_on(X, coeffs, x, y)
        return total
    return g


def _trace(exact: ExactSolution, delta1: Scalar = 1.0):
    def h(x, y, t):
        return _field_values(delta1, x, y) * exact(x, y, t)
    return h


def _initial_fields(exact: ExactSolution, m: int):
    return tuple((lambda x, y, i=i: exact.initial(x, y, i)) for i in range(m))


def _zero_source(x, y, t):
    return 0.0


def example1(case: str = "I", alpha: float = 0.5) -> ProblemSpec:
    """Time-fractional heat-like equation ``D^alpha u = lap u``, ``0 < alpha <= 1``."""
    if not 0 < alpha <= 1:
        raise ValueError("example 1 needs 0 < alpha <= 1")
    case = str(case).upper()
    if case == "I":
        curve = Rectangle(0.0, 0.0, 2 * math.pi, 2 * math.pi)
        X = SpatialField(sp.sin(xs) * sp.sin(ys), "sin x sin y")
        lam, t_eval = -2.0, 1.5
    elif case == "II":
        curve = square01()
        X = SpatialField(sp.cos(sp.pi * xs / 2) * sp.cos(sp.pi * ys / 2), "cos(pi x/2) cos(pi y/2)")
        lam, t_eval = -0.5 * math.pi ** 2, 0.5
    else:
        raise ValueError("case must be 'I' or 'II'")
    exact = ExactSolution(((X, MittagLefflerDecay(alpha, lam)),))
    return ProblemSpec(
        name=f"example1-{case}", curve=curve, orders=(alpha,), gammas=(1.0,),
        coeffs={"A": 1.0, "C": 1.0}, source=_zero_source, boundary=_trace(exact),
        initial=(lambda x, y: X(x, y),), L=t_eval, exact=exact, t_eval=t_eval)


def example2(alpha: float = 2.0) -> ProblemSpec:
    """Wave-like equation ``D^alpha u = (x^2 u_xx + y^2 u_yy) / 12`` on the unit square.

    The closed form ``x^4 cosh t + y^4 sinh t`` solves it only for
    ``alpha = 2``; its trace supplies the boundary data for every ``alpha``.
    """
    if not 1 < alpha <= 2:
        raise ValueError("example 2 needs 1 < alpha <= 2")
    closed = ExactSolution(((SpatialField(xs ** 4), Hyperbolic("cosh")),
                            (SpatialField(ys ** 4), Hyperbolic("sinh"))))
    exact = closed if abs(alpha - 2.0) < 1e-14 else None
    return ProblemSpec(
        name="example2", curve=square01(), orders=(alpha,), gammas=(1.0,),
        coeffs={"A": lambda x, y: x * x / 12.0, "C": lambda x, y: y * y / 12.0},
        source=_zero_source, boundary=_trace(closed),
        initial=(lambda x, y: x ** 4, lambda x, y: y ** 4), L=0.5, exact=exact,
        deviations=("boundary data taken from the trace of x^4 cosh t + y^4 sinh t "
                    "instead of the printed values 4 cosh t and 4 sinh t",),
        t_eval=0.5)


def _convection_example(name, alpha, X, exponent, dcoef, curve, deviations, t_eval=1.0):
    if not 1 < alpha <= 2:
        raise ValueError(f"{name} needs 1 < alpha <= 2")
    T = PowerSeries(((1.0, exponent),))
    exact = ExactSolution(((X, T),))
    coeffs = {"A": 1.0, "C": 1.0, "D": dcoef, "E": dcoef}
    return ProblemSpec(
        name=name, curve=curve, orders=(alpha,), gammas=(1.0,), coeffs=coeffs,
        source=_manufactured_source(exact, (alpha,), (1.0,), coeffs),
        boundary=_trace(exact), initial=_initial_fields(exact, 2), L=1.0, exact=exact,
        deviations=deviations, t_eval=t_eval)


def example3(alpha: float = 1.5) -> ProblemSpec:
    """Convection-diffusion with ``u = 2^12 t^{2+alpha} x^3(1-x)^3 y^3(1-y)^3``."""
    X = SpatialField(2 ** 12 * xs ** 3 * (1 - xs) ** 3 * ys ** 3 * (1 - ys) ** 3,
                     "2^12 x^3(1-x)^3 y^3(1-y)^3")
    return _convection_example(
        "example3", alpha, X, 2.0 + alpha, -5.0, square01(),
        ("source term regenerated from the exact solution; the printed x-factor "
         "6x - 51x^2 + 120x^3 - 150x^3 - 150x^4 + 30x^5 is replaced by "
         "6x - 51x^2 + 120x^3 - 105x^4 + 30x^5",))


def example4(alpha: float = 1.5) -> ProblemSpec:
    """Convection-diffusion with ``u = t^{3+alpha} sin(pi x/6) sin(7 pi x/4) sin(3 pi y/4) sin(5 pi y/4)``."""
    X = SpatialField(sp.sin(sp.pi * xs / 6) * sp.sin(7 * sp.pi * xs / 4)
                     * sp.sin(3 * sp.pi * ys / 4) * sp.sin(5 * sp.pi * ys / 4),
                     "sin(pi x/6) sin(7pi x/4) sin(3pi y/4) sin(5pi y/4)")
    return _convection_example(
        "example4", alpha, X, 3.0 + alpha, -0.1, square01(),
        ("computational domain taken as the unit square",))


def example5(a: float = 3.0, b: float = 1.3) -> ProblemSpec:
    """Multi-order diffusion-wave problem on an anisotropic body, orders 0.8 and 1.7."""
    U = SpatialField(a ** 2 * b ** 2 - ((xs / a) ** 2 + (ys / b) ** 2) * ((xs / b) ** 2 + (ys / a) ** 2), "U")
    T = PowerSeries(((1.0, 1), (-1.0 / 6.0, 3), (1.0 / 200.0, 5)))
    exact = ExactSolution(((U, T),))
    orders = (0.8, 1.7)
    gammas = (lambda x, y: 0.4 * np.sqrt(x * x + y * y),
              lambda x, y: 5.0 * np.exp(-0.1 * (np.abs(x) + np.abs(y))))
    # B is the field multiplying 2 u_xy
    coeffs = {"A": lambda x, y: (y * y - x * x + 50.0) / 50.0,
              "B": lambda x, y: 2.0 * x * y / 50.0,
              "C": lambda x, y: (x * x - y * y + 50.0) / 50.0}
    return ProblemSpec(
        name="example5", curve=example5_curve(a, b), orders=orders, gammas=gammas,
        coeffs=coeffs, source=_manufactured_source(exact, orders, gammas, coeffs),
        boundary=_trace(exact), initial=(lambda x, y: 0.0 * x, lambda x, y: U(x, y)),
        L=4.0, exact=exact, default_M=132, t_eval=4.0)


def manufactured(spatial, exponents: Union[dict, Sequence], orders=(0.5,), gammas=None,
                 coeffs=None, curve: Optional[BoundaryCurve] = None, L: float = 1.0,
                 name: str = "manufactured") -> ProblemSpec:
    """Problem whose exact solution is ``X(x, y) * sum c_k t^{beta_k}``.

    Parameters
    ----------
    spatial : sympy expression in ``x, y`` (or a :class:`SpatialField`).
    exponents : mapping ``beta -> c`` or a sequence of ``(c, beta)`` pairs.
    orders, gammas : fractional orders and their coefficient fields
        (``gammas`` defaults to ones).
    coeffs : operator coefficients (default: Laplacian ``A = C = 1``).
    """
    X = spatial if isinstance(spatial, SpatialField) else SpatialField(spatial)
    terms = tuple((float(c), float(b)) for b, c in exponents.items()) \
        if isinstance(exponents, dict) else tuple((float(c), float(b)) for c, b in exponents)
    orders = tuple(orders)
    gammas = tuple(gammas) if gammas is not None else (1.0,) * len(orders)
    coeffs = dict(coeffs) if coeffs is not None else {"A": 1.0, "C": 1.0}
    exact = ExactSolution(((X, PowerSeries(terms)),))
    m = CaputoOrder(max(orders)).m
    return ProblemSpec(
        name=name, curve=curve or square01(), orders=orders, gammas=gammas, coeffs=coeffs,
        source=_manufactured_source(exact, orders, gammas, coeffs), boundary=_trace(exact),
        initial=_initial_fields(exact, m), L=L, exact=exact, t_eval=L)


def get_problem(example: str, alpha: Optional[float] = None, case: str = "I") -> ProblemSpec:
    """Look a catalog entry up by name (``example1`` .. ``example5`` or ``1`` .. ``5``)."""
    key = str(example).lower().replace("example", "").strip("-_ ")
    if key in ("1", "1i", "1-i"):
        return example1(case, 0.5 if alpha is None else alpha)
    if key in ("1ii", "1-ii"):
        return example1("II", 0.5 if alpha is None else alpha)
    builders = {"2": (example2, 2.0), "3": (example3, 1.5), "4": (example4, 1.5)}
    if key in builders:
        fn, a0 = builders[key]
        return fn(a0 if alpha is None else alpha)
    if key == "5":
        if alpha is not None:
            raise ValueError("example 5 has fixed orders (0.8, 1.7)")
        return example5()
    raise ValueError(f"unknown example {example!r}")


def residual(problem: ProblemSpec, x: float, y: float, t: float) -> float:
    """Imbalance of the equation for the exact solution at one point.

    Time derivatives are taken by direct Caputo quadrature, spatial ones
    from the symbolic derivatives; the result should vanish.
    """
    if problem.exact is None:
        raise ValueError("problem has no exact solution")
    lhs = 0.0
    for gj, a in zip(problem.gammas, problem.orders):
        order = CaputoOrder(a)
        dt = 0.0
        for X, T in problem.exact.terms:
            d = caputo_quadrature(order, lambda s: float(T(s)), t,
                                  du=lambda s, T=T: float(T.derivative(max(s, 1e-300), order.m)))
            dt += float(X(x, y)) * d
        lhs += float(_field_values(gj, x, y)) * dt
    rhs = sum(float(T(t)) * float(_operator_on(X, problem.coeffs, x, y))
              for X, T in problem.exact.terms)
    return lhs - rhs - float(problem.source_values(x, y, t))
