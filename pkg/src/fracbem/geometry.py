"""Boundary curves, constant-element boundary meshes and interior nodes."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.spatial import Delaunay, QhullError

__all__ = [
    "BoundaryCurve",
    "Rectangle",
    "Disk",
    "PolarCurve",
    "square01",
    "example5_curve",
    "matched_interior_count",
    "BoundaryMesh",
    "InteriorNodes",
    "discretize_boundary",
    "generate_interior_nodes",
    "delaunay",
    "write_mesh_csv",
]


class BoundaryCurve:
    """Closed, simple, counter-clockwise curve parameterised by ``s`` in [0, 1)."""

    kind = "curve"

    def point(self, s) -> np.ndarray:
        raise NotImplementedError

    def breakpoints(self) -> list[float]:
        """Parameters of corners, which must become element endpoints."""
        return []

    def perimeter(self) -> float:
        raise NotImplementedError

    def bounding_box(self) -> tuple[float, float, float, float]:
        p = self.point(np.linspace(0.0, 1.0, 2049))
        return p[:, 0].min(), p[:, 1].min(), p[:, 0].max(), p[:, 1].max()

    def diameter(self) -> float:
        x0, y0, x1, y1 = self.bounding_box()
        return math.hypot(x1 - x0, y1 - y0)

    def polyline(self, n: int = 4096) -> np.ndarray:
        s = np.unique(np.concatenate([np.linspace(0.0, 1.0, n, endpoint=False), self.breakpoints()]))
        return self.point(s)

    def signed_distance(self, pts) -> np.ndarray:
        """Distance to the curve, positive inside (dense polyline approximation)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        poly = self.polyline()
        return _polygon_signed_distance(pts, poly)


def _polygon_signed_distance(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    a = poly
    b = np.roll(poly, -1, axis=0)
    d = b - a
    out = np.empty(len(pts))
    for start in range(0, len(pts), 256):
        p = pts[start:start + 256, None, :]
        t = np.clip(np.einsum("pnk,nk->pn", p - a, d) / np.einsum("nk,nk->n", d, d), 0.0, 1.0)
        proj = a + t[..., None] * d
        dist = np.sqrt(((p - proj) ** 2).sum(-1)).min(axis=1)
        out[start:start + 256] = dist * np.where(_inside_polygon(pts[start:start + 256], poly), 1.0, -1.0)
    return out


def _inside_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule."""
    x, y = pts[:, 0:1], pts[:, 1:2]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    crosses = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    return (crosses & (x < xint)).sum(axis=1) % 2 == 1


@dataclass(frozen=True)
class Rectangle(BoundaryCurve):
    x0: float = 0.0
    y0: float = 0.0
    width: float = 1.0
    height: float = 1.0
    kind = "rectangle"

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("degenerate rectangle")

    def _corners(self) -> np.ndarray:
        x0, y0, w, h = self.x0, self.y0, self.width, self.height
        return np.array([[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h], [x0, y0]])

    def breakpoints(self) -> list[float]:
        w, h = self.width, self.height
        P = 2 * (w + h)
        return [0.0, w / P, (w + h) / P, (2 * w + h) / P]

    def perimeter(self) -> float:
        return 2 * (self.width + self.height)

    def point(self, s) -> np.ndarray:
        s = np.mod(np.asarray(s, dtype=float), 1.0)
        arc = s * self.perimeter()
        c = self._corners()
        lengths = np.array([self.width, self.height, self.width, self.height])
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        side = np.clip(np.searchsorted(cum, arc, side="right") - 1, 0, 3)
        frac = (arc - cum[side]) / lengths[side]
        return c[side] + frac[..., None] * (c[side + 1] - c[side])

    def signed_distance(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        dx = np.minimum(pts[:, 0] - self.x0, self.x0 + self.width - pts[:, 0])
        dy = np.minimum(pts[:, 1] - self.y0, self.y0 + self.height - pts[:, 1])
        inside = np.minimum(dx, dy)
        ox, oy = np.maximum(-dx, 0.0), np.maximum(-dy, 0.0)
        return np.where(inside >= 0, inside, -np.hypot(ox, oy))


def square01() -> Rectangle:
    return Rectangle(0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class Disk(BoundaryCurve):
    R: float = 1.0
    cx: float = 0.0
    cy: float = 0.0
    kind = "disk"

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("disk radius must be positive")

    def point(self, s) -> np.ndarray:
        th = 2 * np.pi * np.asarray(s, dtype=float)
        return np.stack([self.cx + self.R * np.cos(th), self.cy + self.R * np.sin(th)], axis=-1)

    def perimeter(self) -> float:
        return 2 * math.pi * self.R

    def signed_distance(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.R - np.hypot(pts[:, 0] - self.cx, pts[:, 1] - self.cy)


@dataclass(frozen=True)
class PolarCurve(BoundaryCurve):
    """Star-shaped curve ``r(theta)`` about the origin, sampled uniformly in theta."""

    radius: Callable = field(compare=False)
    name: str = "polar"
    kind = "polar"

    def point(self, s) -> np.ndarray:
        th = 2 * np.pi * np.asarray(s, dtype=float)
        r = self.radius(th)
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)

    def perimeter(self) -> float:
        h = 1e-6

        def speed(th):
            r = self.radius(th)
            dr = (self.radius(th + h) - self.radius(th - h)) / (2 * h)
            return math.sqrt(r * r + dr * dr)

        val, _ = integrate.quad(speed, 0.0, 2 * math.pi, limit=400, epsrel=1e-10)
        return val

    def signed_distance(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        dist = np.abs(_polygon_signed_distance(pts, self.polyline()))
        th = np.arctan2(pts[:, 1], pts[:, 0])
        inside = np.hypot(pts[:, 0], pts[:, 1]) < self.radius(th)
        return np.where(inside, dist, -dist)


def example5_curve(a: float = 3.0, b: float = 1.3) -> PolarCurve:
    """Boundary on which ``a^2 b^2 = ((x/a)^2+(y/b)^2)((x/b)^2+(y/a)^2)``."""

    def radius(th):
        c, s = np.cos(th), np.sin(th)
        p1 = (c / a) ** 2 + (s / b) ** 2
        p2 = (c / b) ** 2 + (s / a) ** 2
        return math.sqrt(a * b) / (p1 ** 0.25 * p2 ** 0.25)

    return PolarCurve(radius=radius, name=f"example5(a={a}, b={b})")


# --------------------------------------------------------------------------
# meshes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryMesh:
    """Straight constant elements; the collocation node is the chord midpoint."""

    endpoints: np.ndarray  # (N+1, 2), closed: endpoints[N] == endpoints[0]
    curve: BoundaryCurve = field(compare=False, repr=False)

    @property
    def N(self) -> int:
        return len(self.endpoints) - 1

    @property
    def starts(self) -> np.ndarray:
        return self.endpoints[:-1]

    @property
    def ends(self) -> np.ndarray:
        return self.endpoints[1:]

    @property
    def nodes(self) -> np.ndarray:
        return 0.5 * (self.starts + self.ends)

    @property
    def lengths(self) -> np.ndarray:
        return np.hypot(*(self.ends - self.starts).T)

    @property
    def normals(self) -> np.ndarray:
        d = self.ends - self.starts
        return np.stack([d[:, 1], -d[:, 0]], axis=1) / self.lengths[:, None]

    def contains(self, pts) -> np.ndarray:
        return _inside_polygon(np.atleast_2d(pts), self.endpoints[:-1])

    def distance(self, pts) -> np.ndarray:
        return np.abs(_polygon_signed_distance(np.atleast_2d(pts), self.endpoints[:-1]))


@dataclass(frozen=True)
class InteriorNodes:
    points: np.ndarray
    triangles: np.ndarray

    @property
    def M(self) -> int:
        return len(self.points)


def discretize_boundary(curve: BoundaryCurve, N: int) -> BoundaryMesh:
    """Split ``curve`` into ``N`` elements of equal parameter length.

    Corners (rectangle vertices) are always element endpoints, so every
    collocation node sits on a smooth part of the boundary.
    """
    if N < 4:
        raise ValueError("at least 4 boundary elements are required")
    bps = curve.breakpoints()
    if bps:
        bps = sorted(bps) + [1.0]
        spans = np.diff(bps)
        # elements per side proportional to side length, at least one each
        counts = np.maximum(1, np.floor(N * spans).astype(int))
        while counts.sum() < N:
            counts[np.argmax(spans / counts)] += 1
        while counts.sum() > N:
            j = np.argmin(np.where(counts > 1, spans / counts, np.inf))
            counts[j] -= 1
        s = np.concatenate([np.linspace(a, b, c, endpoint=False)
                            for a, b, c in zip(bps[:-1], bps[1:], counts)])
    else:
        s = np.arange(N) / N
    pts = curve.point(s)
    endpoints = np.vstack([pts, pts[:1]])
    mesh = BoundaryMesh(endpoints=endpoints, curve=curve)
    if np.any(mesh.lengths <= 1e-14 * curve.diameter()):
        raise ValueError("degenerate boundary element")
    return mesh


def generate_interior_nodes(curve: BoundaryCurve, M: int) -> InteriorNodes:
    """Quasi-uniform interior collocation points with their Delaunay triangles.

    Rectangles get a tensor grid ``x0 + w i/(nx+1)``; other shapes get a
    square grid clipped to a margin of half the spacing from the boundary,
    with the points nearest the boundary dropped so exactly ``M`` remain.
    """
    if M < 4:
        raise ValueError("at least 4 interior nodes are required")
    if isinstance(curve, Rectangle):
        w, h = curve.width, curve.height
        nx = max(1, round(math.sqrt(M * w / h)))
        ny = max(1, round(M / nx))
        gx = curve.x0 + w * np.arange(1, nx + 1) / (nx + 1)
        gy = curve.y0 + h * np.arange(1, ny + 1) / (ny + 1)
        X, Y = np.meshgrid(gx, gy, indexing="xy")
        pts = np.column_stack([X.ravel(), Y.ravel()])
    else:
        x0, y0, x1, y1 = curve.bounding_box()
        area = _polygon_area(curve.polyline())
        spacing = math.sqrt(area / M)
        pts = None
        for _ in range(60):
            gx = np.arange(x0 + 0.5 * spacing, x1, spacing)
            gy = np.arange(y0 + 0.5 * spacing, y1, spacing)
            # centre the lattice in the bounding box
            gx += 0.5 * ((x1 - gx[-1]) - (gx[0] - x0))
            gy += 0.5 * ((y1 - gy[-1]) - (gy[0] - y0))
            X, Y = np.meshgrid(gx, gy, indexing="xy")
            cand = np.column_stack([X.ravel(), Y.ravel()])
            sd = curve.signed_distance(cand)
            keep = sd > 0.5 * spacing
            if keep.sum() >= M:
                cand, sd = cand[keep], sd[keep]
                order = np.lexsort((cand[:, 0], cand[:, 1], -sd))
                pts = cand[np.sort(order[:M])]
                break
            spacing *= 0.97
        if pts is None:
            raise ValueError("could not place interior nodes: empty interior")
    if len(pts) == 0:
        raise ValueError("empty interior")
    return InteriorNodes(points=pts, triangles=delaunay(pts))


def matched_interior_count(curve: BoundaryCurve, N: int) -> int:
    """Interior node count whose grid spacing equals the mean element length.

    ``M = round(area / (perimeter / N)^2)``, at least 4.
    """
    if N < 1:
        raise ValueError("N must be positive")
    ell = curve.perimeter() / N
    return max(4, int(round(_polygon_area(curve.polyline()) / ell ** 2)))


def _polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def delaunay(points) -> np.ndarray:
    """Delaunay triangles (index triples, counter-clockwise)."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    try:
        tri = Delaunay(pts).simplices.copy()
    except QhullError as exc:
        raise ValueError("points are collinear") from exc
    a, b, c = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    flip = cross < 0
    tri[flip, 1], tri[flip, 2] = tri[flip, 2], tri[flip, 1].copy()
    return tri


def write_mesh_csv(path, mesh: BoundaryMesh, interior: InteriorNodes) -> None:
    """Node table followed by a connectivity table, both plot-ready."""
    def g(v):
        return format(float(v), ".17g")

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "index", "x", "y", "nx", "ny", "length"])
        for i, (p, n, l) in enumerate(zip(mesh.nodes, mesh.normals, mesh.lengths)):
            w.writerow(["boundary_node", i, g(p[0]), g(p[1]), g(n[0]), g(n[1]), g(l)])
        for i, p in enumerate(mesh.starts):
            w.writerow(["boundary_vertex", i, g(p[0]), g(p[1]), "", "", ""])
        for i, p in enumerate(interior.points):
            w.writerow(["interior_node", i, g(p[0]), g(p[1]), "", "", ""])
        w.writerow([])
        w.writerow(["kind", "index", "v0", "v1", "v2"])
        for i in range(mesh.N):
            w.writerow(["boundary_element", i, i, (i + 1) % mesh.N, ""])
        for i, t in enumerate(interior.triangles):
            w.writerow(["triangle", i, int(t[0]), int(t[1]), int(t[2])])
