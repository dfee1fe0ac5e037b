"""Exact domain descriptions and planar convex measurements.

Every domain is an open set. Point arguments are arrays of shape ``(..., m)``
and all membership/distance queries are vectorized over the leading axes.

JSON layout (stable field names)::

    {"variant": "box", "sides": [a1, ..., am], "origin": [o1, ..., om]}
    {"variant": "disk", "radius": r, "center": [c1, ..., cm]}
    {"variant": "ellipse", "a": a, "b": b, "center": [cx, cy]}
    {"variant": "polygon", "vertices": [[x, y], ...]}
    {"variant": "perforated_cube", "m": m, "L": L, "N": N, "delta": delta}
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import gamma

__all__ = [
    "Domain",
    "Box",
    "Disk",
    "Ellipse",
    "ConvexPolygon",
    "PerforatedCube",
    "ConvexMeasurements",
    "DeltaStar",
    "make_perforated_cube",
    "delta_star",
    "newtonian_capacity_constant",
    "measure_convex",
    "inscribed_rectangle_height",
    "contains",
    "distance_to_boundary",
    "domain_from_dict",
    "domain_from_json",
]


def _points(x, m):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m:
        raise ValueError(f"point dimension {x.shape[-1]} does not match domain dimension {m}")
    return x


class Domain:
    """Base class for open domains in R^m."""

    m: int

    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def distance(self, x) -> np.ndarray:
        """Euclidean distance to the boundary; meaningful for points inside."""
        raise NotImplementedError

    def axis_distance(self, x, axis: int, sign: int) -> np.ndarray:
        """Distance from ``x`` to the first boundary crossing along ``sign * e_axis``."""
        raise NotImplementedError

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def midpoint(self) -> np.ndarray:
        lo, hi = self.bounds()
        return 0.5 * (lo + hi)

    @property
    def reflection_symmetric(self) -> bool:
        """True if invariant under x_k -> 2 c_k - x_k for every axis (c = center)."""
        return False

    def grid_anchor(self) -> np.ndarray:
        """Point that full (unreduced) grids place a node on."""
        return self.midpoint()

    def diameter(self) -> float:
        lo, hi = self.bounds()
        return float(np.linalg.norm(hi - lo))

    def scaled(self, s: float) -> "Domain":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _as_tuple(v) -> tuple[float, ...]:
    return tuple(float(t) for t in np.ravel(v))


@dataclass(frozen=True)
class Box(Domain):
    """Axis-aligned open box ``prod_k (origin_k, origin_k + sides_k)``."""

    sides: tuple[float, ...]
    origin: tuple[float, ...] | None = None

    def __post_init__(self):
        sides = _as_tuple(self.sides)
        origin = _as_tuple(self.origin) if self.origin is not None else (0.0,) * len(sides)
        if len(sides) < 2:
            raise ValueError("Box needs dimension m >= 2")
        if len(origin) != len(sides):
            raise ValueError("origin and sides must have the same length")
        if min(sides) <= 0:
            raise ValueError("Box sides must be positive")
        object.__setattr__(self, "sides", sides)
        object.__setattr__(self, "origin", origin)

    @property
    def m(self) -> int:
        return len(self.sides)

    def bounds(self):
        lo = np.array(self.origin)
        return lo, lo + np.array(self.sides)

    def contains(self, x):
        x = _points(x, self.m)
        lo, hi = self.bounds()
        return np.all((x > lo) & (x < hi), axis=-1)

    def distance(self, x):
        x = _points(x, self.m)
        lo, hi = self.bounds()
        return np.minimum(x - lo, hi - x).min(axis=-1)

    def axis_distance(self, x, axis, sign):
        x = _points(x, self.m)
        lo, hi = self.bounds()
        return hi[axis] - x[..., axis] if sign > 0 else x[..., axis] - lo[axis]

    @property
    def reflection_symmetric(self):
        return True

    def grid_anchor(self):
        return np.array(self.origin)

    def scaled(self, s):
        return Box(tuple(s * a for a in self.sides), tuple(s * o for o in self.origin))

    def polygon(self) -> "ConvexPolygon":
        if self.m != 2:
            raise ValueError("only planar boxes convert to polygons")
        (x0, y0), (x1, y1) = self.bounds()
        return ConvexPolygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])

    def to_dict(self):
        return {"variant": "box", "sides": list(self.sides), "origin": list(self.origin)}


@dataclass(frozen=True)
class Disk(Domain):
    """Open ball of the given radius; the dimension is ``len(center)``."""

    radius: float
    center: tuple[float, ...] = (0.0, 0.0)

    def __post_init__(self):
        c = _as_tuple(self.center)
        if len(c) < 2:
            raise ValueError("Disk needs dimension m >= 2")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def m(self):
        return len(self.center)

    def bounds(self):
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def contains(self, x):
        x = _points(x, self.m)
        return np.sum((x - self.center) ** 2, axis=-1) < self.radius**2

    def distance(self, x):
        x = _points(x, self.m)
        return self.radius - np.linalg.norm(x - self.center, axis=-1)

    def axis_distance(self, x, axis, sign):
        y = _points(x, self.m) - self.center
        perp = np.sum(y**2, axis=-1) - y[..., axis] ** 2
        half = np.sqrt(np.maximum(self.radius**2 - perp, 0.0))
        return half - sign * y[..., axis]

    @property
    def reflection_symmetric(self):
        return True

    def diameter(self):
        return 2 * self.radius

    def scaled(self, s):
        return Disk(s * self.radius, tuple(s * c for c in self.center))

    def to_dict(self):
        return {"variant": "disk", "radius": self.radius, "center": list(self.center)}


@dataclass(frozen=True)
class Ellipse(Domain):
    """Axis-aligned open ellipse with semi-axes ``a >= b`` (``a`` along x)."""

    a: float
    b: float
    center: tuple[float, float] = (0.0, 0.0)

    m = 2

    def __post_init__(self):
        c = _as_tuple(self.center)
        if len(c) != 2:
            raise ValueError("Ellipse is planar")
        if self.b <= 0 or self.a < self.b:
            raise ValueError("Ellipse requires a >= b > 0")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    def bounds(self):
        c = np.array(self.center)
        r = np.array([self.a, self.b])
        return c - r, c + r

    def contains(self, x):
        y = _points(x, 2) - self.center
        return (y[..., 0] / self.a) ** 2 + (y[..., 1] / self.b) ** 2 < 1.0

    def distance(self, x):
        y = np.abs(_points(x, 2) - self.center)
        return _ellipse_distance(self.a, self.b, y[..., 0], y[..., 1])

    def axis_distance(self, x, axis, sign):
        y = _points(x, 2) - self.center
        r = (self.a, self.b)
        other = 1 - axis
        half = r[axis] * np.sqrt(np.maximum(1.0 - (y[..., other] / r[other]) ** 2, 0.0))
        return half - sign * y[..., axis]

    @property
    def reflection_symmetric(self):
        return True

    def diameter(self):
        return 2 * self.a

    def scaled(self, s):
        return Ellipse(s * self.a, s * self.b, tuple(s * c for c in self.center))

    def to_dict(self):
        return {"variant": "ellipse", "a": self.a, "b": self.b, "center": list(self.center)}


def _ellipse_distance(e0, e1, y0, y1, iters=200):
    # Eberly's bisection for first-quadrant points inside the ellipse, e0 >= e1.
    y0, y1 = np.broadcast_arrays(np.asarray(y0, float), np.asarray(y1, float))
    out = np.empty(y0.shape)

    on_axis = y1 <= 0.0
    # y1 == 0: closest point is either the vertex (e0, 0) or an interior-of-arc point
    if np.any(on_axis):
        z0 = y0[on_axis]
        crit = (e0**2 - e1**2) / e0
        x0 = np.where(z0 < crit, e0**2 * z0 / np.maximum(e0**2 - e1**2, 1e-300), e0)
        x0 = np.minimum(x0, e0)
        x1 = e1 * np.sqrt(np.maximum(1.0 - (x0 / e0) ** 2, 0.0))
        out[on_axis] = np.hypot(x0 - z0, x1)

    rest = ~on_axis
    if np.any(rest):
        z0, z1 = y0[rest], y1[rest]
        lo = -(e1**2) + e1 * z1
        hi = -(e1**2) + np.sqrt((e0 * z0) ** 2 + (e1 * z1) ** 2)
        for _ in range(iters):
            t = 0.5 * (lo + hi)
            f = (e0 * z0 / (t + e0**2)) ** 2 + (e1 * z1 / (t + e1**2)) ** 2 - 1.0
            lo = np.where(f > 0, t, lo)
            hi = np.where(f > 0, hi, t)
        t = 0.5 * (lo + hi)
        x0 = e0**2 * z0 / (t + e0**2)
        x1 = e1**2 * z1 / (t + e1**2)
        out[rest] = np.hypot(x0 - z0, x1 - z1)
    return out


@dataclass(frozen=True, eq=False)
class ConvexPolygon(Domain):
    """Strictly convex polygon with counterclockwise vertices."""

    vertices: np.ndarray

    m = 2

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("polygon needs at least 3 planar vertices")
        e = np.roll(v, -1, axis=0) - v
        if np.any(np.linalg.norm(e, axis=1) == 0):
            raise ValueError("polygon has repeated vertices")
        area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area == 0:
            raise ValueError("degenerate polygon (zero area)")
        if area < 0:
            raise ValueError("polygon vertices must be counterclockwise")
        turn = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        if np.any(turn <= 0):
            raise ValueError("polygon is not strictly convex")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __eq__(self, other):
        return isinstance(other, ConvexPolygon) and np.array_equal(self.vertices, other.vertices)

    __hash__ = None

    @property
    def edges(self):
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def grid_anchor(self):
        return self.vertices.min(axis=0)

    def _cross(self, x):
        a, b = self.edges
        x = _points(x, 2)[..., None, :]
        e = b - a
        return e[:, 0] * (x[..., 1] - a[:, 1]) - e[:, 1] * (x[..., 0] - a[:, 0])

    def contains(self, x):
        return np.all(self._cross(x) > 0, axis=-1)

    def distance(self, x):
        a, b = self.edges
        x = _points(x, 2)[..., None, :]
        e = b - a
        t = np.clip(np.sum((x - a) * e, axis=-1) / np.sum(e * e, axis=-1), 0.0, 1.0)
        d = np.linalg.norm(x - (a + t[..., None] * e), axis=-1)
        return d.min(axis=-1)

    def axis_distance(self, x, axis, sign):
        a, b = self.edges
        x = _points(x, 2)[..., None, :]
        e = b - a
        other = 1 - axis
        # solve x + t*sign*e_axis = a + s*e for edges that are not parallel to the ray
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (x[..., other] - a[:, other]) / e[:, other]
            t = sign * (a[:, axis] + s * e[:, axis] - x[..., axis])
            ok = (e[:, other] != 0) & (s >= 0) & (s <= 1) & (t >= 0)
        return np.where(ok, t, np.inf).min(axis=-1)

    def diameter(self):
        v = self.vertices
        return float(np.max(np.linalg.norm(v[:, None] - v[None], axis=-1)))

    def scaled(self, s):
        return ConvexPolygon(s * self.vertices)

    def to_dict(self):
        return {"variant": "polygon", "vertices": self.vertices.tolist()}


@dataclass(frozen=True)
class PerforatedCube(Domain):
    """Open cube ``(-L/2, L/2)^m`` minus ``N^m`` closed balls of radius ``delta``.

    Ball ``i`` sits at the center of the ``i``-th subcube of side ``L/N``;
    centers are enumerated lexicographically over the subcube index grid.
    """

    m: int
    L: float
    N: int
    delta: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError("dimension m must be an integer >= 2")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be an integer >= 1")
        if self.L <= 0 or self.delta <= 0:
            raise ValueError("L and delta must be positive")
        if self.delta >= self.L / (2 * self.N):
            raise ValueError(
                f"delta={self.delta} violates delta < L/(2N) = {self.L / (2 * self.N)}"
            )
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def cell(self) -> float:
        return self.L / self.N

    @property
    def hole_centers(self) -> np.ndarray:
        ticks = -self.L / 2 + (np.arange(self.N) + 0.5) * self.cell
        return np.array(list(itertools.product(ticks, repeat=self.m)))

    def bounds(self):
        return np.full(self.m, -self.L / 2), np.full(self.m, self.L / 2)

    def _nearest_center(self, x):
        idx = np.clip(np.floor((x + self.L / 2) / self.cell), 0, self.N - 1)
        return -self.L / 2 + (idx + 0.5) * self.cell

    def _face_distance(self, x):
        return (self.L / 2 - np.abs(x)).min(axis=-1)

    def contains(self, x):
        x = _points(x, self.m)
        c = self._nearest_center(x)
        in_cube = np.all(np.abs(x) < self.L / 2, axis=-1)
        return in_cube & (np.sum((x - c) ** 2, axis=-1) > self.delta**2)

    def distance(self, x):
        x = _points(x, self.m)
        hole = np.linalg.norm(x - self._nearest_center(x), axis=-1) - self.delta
        return np.minimum(self._face_distance(x), hole)

    def hole_axis_distance(self, x, axis, sign):
        """Ray distance to the first hole hit along ``sign * e_axis`` (inf if none)."""
        x = _points(x, self.m)
        c = self._nearest_center(x)
        ticks = -self.L / 2 + (np.arange(self.N) + 0.5) * self.cell
        # the ray stays in one column of subcubes; holes never leave their subcube
        perp = np.sum((x - c) ** 2, axis=-1) - (x[..., axis] - c[..., axis]) ** 2
        disc = self.delta**2 - perp
        ahead = sign * (ticks - x[..., axis, None])
        t = ahead - np.sqrt(np.maximum(disc, 0.0))[..., None]
        t = np.where((disc[..., None] >= 0) & (ahead > 0) & (t >= 0), t, np.inf)
        return t.min(axis=-1)

    def axis_distance(self, x, axis, sign):
        x = _points(x, self.m)
        face = self.L / 2 - sign * x[..., axis]
        return np.minimum(face, self.hole_axis_distance(x, axis, sign))

    @property
    def reflection_symmetric(self):
        return True

    def diameter(self):
        return self.L * math.sqrt(self.m)

    def scaled(self, s):
        return PerforatedCube(self.m, s * self.L, self.N, s * self.delta)

    def to_dict(self):
        return {"variant": "perforated_cube", "m": self.m, "L": self.L, "N": self.N, "delta": self.delta}


def domain_from_dict(d: dict) -> Domain:
    d = dict(d)
    variant = d.pop("variant", None)
    if variant == "box":
        return Box(tuple(d["sides"]), tuple(d["origin"]) if d.get("origin") is not None else None)
    if variant == "disk":
        return Disk(d["radius"], tuple(d.get("center", (0.0, 0.0))))
    if variant == "ellipse":
        return Ellipse(d["a"], d["b"], tuple(d.get("center", (0.0, 0.0))))
    if variant == "polygon":
        return ConvexPolygon(d["vertices"])
    if variant == "perforated_cube":
        return PerforatedCube(d["m"], d["L"], d["N"], d["delta"])
    raise ValueError(f"unknown domain variant {variant!r}")


def domain_from_json(s: str) -> Domain:
    return domain_from_dict(json.loads(s))


def make_perforated_cube(m: int, L: float, N: int, delta: float) -> PerforatedCube:
    """Cube of side ``L`` with a ball of radius ``delta`` removed from each of its ``N^m`` subcubes."""
    return PerforatedCube(m, L, N, delta)


def contains(spec: Domain, x) -> np.ndarray | bool:
    res = spec.contains(_points(x, spec.m))
    return bool(res) if np.ndim(res) == 0 else res


def distance_to_boundary(spec: Domain, x) -> np.ndarray | float:
    """Exact Euclidean distance from interior point(s) ``x`` to the boundary.

    Raises
    ------
    ValueError
        If a point is outside the domain or has the wrong dimension.
    """
    x = _points(x, spec.m)
    if not np.all(spec.contains(x)):
        raise ValueError("distance_to_boundary requires points inside the domain")
    d = spec.distance(x)
    return float(d) if np.ndim(d) == 0 else d


# --- perforated-cube radius laws ---------------------------------------------


def newtonian_capacity_constant(m: int) -> float:
    """Capacity of the unit ball in R^m for the generator Delta: (m-2) |S^{m-1}|.

    This normalization is a convention; it only enters the small-hole
    validity check for m >= 3.
    """
    if m < 3:
        raise ValueError("Newtonian capacity is defined for m >= 3")
    return (m - 2) * 2 * math.pi ** (m / 2) / gamma(m / 2)


class DeltaStar(NamedTuple):
    delta: float
    valid: bool
    n_min: int


def delta_star(m: int, alpha: float, N: int, L: float, strict: bool = False) -> DeltaStar:
    """Hole radius of the near-extremal perforated cube.

    ``m = 2``: ``L/(2N) exp(-N^(2-alpha))``, valid when below ``L/(6N)``.
    ``m >= 3``: ``L N^((alpha-m)/(m-2))``, valid when the capacity of the
    hole is at most ``(L/N)^(m-2)/16``.

    Returns
    -------
    DeltaStar
        ``(delta, valid, n_min)`` where ``n_min`` is the smallest N for which
        the regime condition holds. With ``strict=True`` an invalid N raises
        ``ValueError`` instead.
    """
    if not 1 < alpha < 2:
        raise ValueError("alpha must lie in (1, 2)")
    if m < 2 or N < 1 or L <= 0:
        raise ValueError("need m >= 2, N >= 1, L > 0")
    if m == 2:
        delta = L / (2 * N) * math.exp(-(N ** (2 - alpha)))
        valid = delta < L / (6 * N)
        threshold = math.log(3.0)
        n_min = max(1, math.floor(threshold ** (1 / (2 - alpha))))
        while n_min ** (2 - alpha) <= threshold:
            n_min += 1
    else:
        delta = L * N ** ((alpha - m) / (m - 2))
        kappa = newtonian_capacity_constant(m)
        valid = kappa * delta ** (m - 2) <= (L / N) ** (m - 2) / 16
        threshold = 16 * kappa
        n_min = max(1, math.floor(threshold ** (1 / (2 - alpha))) - 1)
        while n_min ** (2 - alpha) < threshold:
            n_min += 1
    if strict and not valid:
        raise ValueError(f"N={N} is below the regime threshold; smallest admissible N is {n_min}")
    return DeltaStar(delta, bool(valid), n_min)


# --- planar convex measurements ----------------------------------------------


@dataclass(frozen=True)
class ConvexMeasurements:
    width: float
    diameter: float
    chord: float
    width_direction: tuple[float, float] = field(default=(0.0, 1.0))


def measure_convex(shape) -> ConvexMeasurements:
    """Width, diameter and longest chord perpendicular to the width direction.

    Accepts a :class:`ConvexPolygon`, a planar :class:`Box`, a planar
    :class:`Disk` or an :class:`Ellipse` (closed forms for the last two).
    """
    if isinstance(shape, Disk):
        if shape.m != 2:
            raise ValueError("convex measurements are planar")
        d = 2 * shape.radius
        return ConvexMeasurements(d, d, d, (0.0, 1.0))
    if isinstance(shape, Ellipse):
        return ConvexMeasurements(2 * shape.b, 2 * shape.a, 2 * shape.a, (0.0, 1.0))
    if isinstance(shape, Box):
        shape = shape.polygon()
    if not isinstance(shape, ConvexPolygon):
        raise TypeError(f"cannot measure {type(shape).__name__}")

    v = shape.vertices
    a, b = shape.edges
    e = b - a
    normals = np.stack([-e[:, 1], e[:, 0]], axis=1) / np.linalg.norm(e, axis=1)[:, None]
    # heights[i, j]: distance of vertex j from the line of edge i (inward normals)
    heights = np.einsum("ijk,ik->ij", v[None, :, :] - a[:, None, :], normals)
    spans = heights.max(axis=1)
    i = int(np.argmin(spans))  # argmin returns the first edge on ties
    width = float(spans[i])
    u = normals[i]

    diam = shape.diameter()

    # chord length along t (perpendicular to u) is concave in the offset s = x.u,
    # so its maximum is attained at a vertex level
    t = np.array([-u[1], u[0]])
    s_v = v @ u
    s_a, s_b = a @ u, b @ u
    t_a, t_b = a @ t, b @ t
    levels = s_v[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (levels - s_a) / (s_b - s_a)
        hit = (s_b != s_a) & (lam >= 0) & (lam <= 1)
        tt = t_a + lam * (t_b - t_a)
    # edges lying on a level line contribute both endpoints
    flat = np.isclose(s_a, s_b, rtol=0, atol=1e-14 * max(1.0, diam)) & np.isclose(
        s_a, levels, rtol=0, atol=1e-14 * max(1.0, diam)
    )
    tmax = np.maximum(np.where(hit, tt, -np.inf).max(axis=1), np.where(flat, np.maximum(t_a, t_b), -np.inf).max(axis=1))
    tmin = np.minimum(np.where(hit, tt, np.inf).min(axis=1), np.where(flat, np.minimum(t_a, t_b), np.inf).min(axis=1))
    chord = float(np.max(tmax - tmin))
    return ConvexMeasurements(width, diam, chord, (float(u[0]), float(u[1])))


def inscribed_rectangle_height(w: float, chord: float) -> float:
    """Side ``h`` of the rectangle ``h x (1 - h/w) chord`` minimizing its Dirichlet eigenvalue."""
    if not 0 < w <= chord:
        raise ValueError("need 0 < w <= chord")
    return (w * chord**2) ** (1 / 3) / (1 + (chord / w) ** (2 / 3))
