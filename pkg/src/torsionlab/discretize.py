"""Node-centered finite differences for -Laplace on a uniform grid.

Dirichlet boundaries that cut grid lines use the symmetric ghost-value
variant of Shortley-Weller (the cut side contributes ``1/(theta h^2)`` to
the diagonal and nothing off the diagonal). Mirror nodes (Neumann faces of a
unit cell, or symmetry planes of a reduced grid) use ghost reflection; the
resulting rows are symmetrized by the diagonal node weights, i.e. the
discrete problem is ``K u = lambda W u`` with ``K`` symmetric and ``W``
diagonal, and the stored operator is ``A = W^{-1/2} K W^{-1/2}``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .geometry import Box, Domain, PerforatedCube

__all__ = [
    "UnresolvableFeatureError",
    "GridDomain",
    "SparseOperator",
    "build_grid",
    "assemble_dirichlet",
    "assemble_unit_cell",
    "min_cells_across_hole",
    "theta_floor",
]

min_cells_across_hole = 8
theta_floor = 1e-6

DIRICHLET = -1
MIRROR = -2


class UnresolvableFeatureError(ValueError):
    """Grid spacing too coarse for the smallest geometric feature."""

    def __init__(self, message, max_h=None):
        super().__init__(message)
        self.max_h = max_h


@dataclass(eq=False)
class GridDomain:
    """Interior nodes of a uniform grid together with their boundary data.

    Attributes
    ----------
    spec : Domain
    h : float
    anchor : ndarray (m,)
        Grid node at integer index 0.
    index : ndarray (n, m) of int
        Integer grid indices of the interior nodes (lexicographic order).
    coords : ndarray (n, m)
    neighbors : ndarray (n, m, 2) of int
        Node index of the lower/upper neighbor along each axis, ``-1`` for a
        Dirichlet boundary crossing, ``-2`` for a mirror (ghost) node.
    theta : ndarray (n, m, 2)
        Fractional distance to the boundary in units of ``h`` (1 for
        neighbors that are nodes).
    weights : ndarray (n,)
        Node weights, ``1/2`` per axis on which the node is mirrored.
    reflected : tuple of bool
        Axes along which the grid covers only the upper half of a
        reflection-symmetric domain.
    neumann_outer : bool
    clamped : int
        Number of nodes dropped by the theta floor.
    """

    spec: Domain
    h: float
    anchor: np.ndarray
    index: np.ndarray
    coords: np.ndarray
    neighbors: np.ndarray
    theta: np.ndarray
    weights: np.ndarray
    reflected: tuple
    neumann_outer: bool = False
    clamped: int = 0

    @property
    def m(self) -> int:
        return self.coords.shape[1]

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def interior_nodes(self):
        return self.index

    @property
    def boundary_distances(self):
        return self.theta

    @property
    def extents(self):
        return self.spec.bounds()

    def fold(self, x) -> np.ndarray:
        """Map points into the covered part of a reduced grid by reflection."""
        x = np.array(x, dtype=float)
        for k, r in enumerate(self.reflected):
            if r:
                x[..., k] = self.anchor[k] + np.abs(x[..., k] - self.anchor[k])
        return x

    def sample(self, values, x) -> np.ndarray:
        """Multilinear interpolation of a nodal field; non-interior nodes count as 0."""
        values = np.asarray(values, dtype=float)
        x = self.fold(np.atleast_2d(np.asarray(x, dtype=float)))
        lookup = self._lookup()
        s = (x - self.anchor) / self.h
        base = np.floor(s + 1e-9).astype(np.int64)
        frac = np.clip(s - base, 0.0, 1.0)
        out = np.zeros(len(x))
        for corner in np.ndindex(*(2,) * self.m):
            c = np.array(corner)
            wgt = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1)
            j = np.array([lookup.get(tuple(t), -1) for t in base + c])
            out += np.where(j >= 0, wgt * values[np.maximum(j, 0)], 0.0)
        return out

    def _lookup(self):
        if not hasattr(self, "_index_map"):
            self._index_map = {tuple(t): i for i, t in enumerate(self.index.tolist())}
        return self._index_map

    def to_csv(self, path) -> None:
        """Write ``index, coordinates, theta`` rows (theta as minus/plus per axis)."""
        path = Path(path)
        m = self.m
        header = ["node"] + [f"x{k}" for k in range(m)]
        header += [f"theta{k}{side}" for k in range(m) for side in ("-", "+")]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            th = self.theta.reshape(self.n, 2 * m)
            for i in range(self.n):
                w.writerow([i, *(f"{c:.17g}" for c in self.coords[i]), *(f"{t:.17g}" for t in th[i])])


def _hole_radius(spec):
    return spec.delta if isinstance(spec, PerforatedCube) else None


def build_grid(spec: Domain, h: float, symmetric: bool = False, neumann_outer: bool = False) -> GridDomain:
    """Interior nodes and boundary fractions of ``spec`` on a grid of spacing ``h``.

    Parameters
    ----------
    symmetric : bool
        Cover only the upper half along every axis of a reflection-symmetric
        domain; nodes on the symmetry planes become mirror nodes.
    neumann_outer : bool
        Keep nodes on the faces of the outer box (``Box`` or
        ``PerforatedCube`` only) and treat them as mirror nodes.

    Raises
    ------
    UnresolvableFeatureError
        If fewer than 8 cells span a hole diameter, or the interior is empty.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    delta = _hole_radius(spec)
    if delta is not None and 2 * delta / h < min_cells_across_hole * (1 - 1e-12):
        max_h = 2 * delta / min_cells_across_hole
        raise UnresolvableFeatureError(
            f"unresolvable feature: hole diameter {2 * delta:.4g} spans {2 * delta / h:.2f} cells "
            f"(< {min_cells_across_hole}); use h <= {max_h:.6g}",
            max_h=max_h,
        )
    if symmetric and not spec.reflection_symmetric:
        raise ValueError(f"{type(spec).__name__} is not reflection symmetric")
    if neumann_outer and not isinstance(spec, (Box, PerforatedCube)):
        raise ValueError("Neumann outer faces need a Box or PerforatedCube")

    m = spec.m
    lo, hi = spec.bounds()
    anchor = spec.midpoint() if symmetric else spec.grid_anchor()
    eps = 1e-9
    kmin = np.ceil((lo - anchor) / h - eps).astype(np.int64)
    kmax = np.floor((hi - anchor) / h + eps).astype(np.int64)
    if symmetric:
        kmin = np.zeros(m, dtype=np.int64)
    if neumann_outer:
        for k in range(m):
            for bound, kk in ((lo[k], kmin[k]), (hi[k], kmax[k])):
                if symmetric and bound == lo[k]:
                    continue
                if abs(anchor[k] + kk * h - bound) > 1e-9 * h:
                    raise ValueError("Neumann faces must lie on grid nodes; choose h dividing the half side")
    shape = tuple(int(t) for t in kmax - kmin + 1)

    axes = [anchor[k] + h * np.arange(kmin[k], kmax[k] + 1) for k in range(m)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    mask = spec.contains(pts)
    if neumann_outer:
        closed = np.all((pts >= lo - 1e-9 * h) & (pts <= hi + 1e-9 * h), axis=-1)
        if isinstance(spec, PerforatedCube):
            c = spec._nearest_center(pts)
            closed &= np.sum((pts - c) ** 2, axis=-1) > spec.delta**2
        mask |= closed
    mask = mask.reshape(shape)

    reflected = tuple(bool(symmetric) for _ in range(m))
    clamped = 0
    while True:
        grid = _connect(spec, h, anchor, kmin, mask, reflected, neumann_outer)
        bad = np.any(grid.theta < theta_floor, axis=(1, 2))
        if not np.any(bad):
            break
        clamped += int(bad.sum())
        mask[tuple((grid.index[bad] - kmin).T)] = False
    if grid.n == 0:
        raise UnresolvableFeatureError("empty interior: no grid node lies inside the domain")
    grid.clamped = clamped
    return grid


def _connect(spec, h, anchor, kmin, mask, reflected, neumann_outer):
    m = spec.m
    shape = mask.shape
    flat = mask.ravel()
    n = int(flat.sum())
    number = np.full(flat.size, -1, dtype=np.int64)
    number[flat] = np.arange(n)
    number = number.reshape(shape)

    rel = np.argwhere(mask)  # lexicographic
    index = rel + kmin
    coords = anchor + h * index
    lo, hi = spec.bounds()

    neighbors = np.empty((n, m, 2), dtype=np.int64)
    theta = np.ones((n, m, 2))
    for k in range(m):
        for side, step in ((0, -1), (1, 1)):
            nb = rel.copy()
            nb[:, k] += step
            inside = (nb[:, k] >= 0) & (nb[:, k] < shape[k])
            j = np.full(n, DIRICHLET, dtype=np.int64)
            j[inside] = number[tuple(nb[inside].T)]
            missing = j < 0
            mirror = np.zeros(n, dtype=bool)
            if reflected[k] and side == 0:
                mirror |= index[:, k] == 0
            if neumann_outer:
                face = hi[k] if side == 1 else lo[k]
                mirror |= np.abs(coords[:, k] - face) <= 1e-9 * h
            mirror &= missing
            j[mirror] = MIRROR
            cut = missing & ~mirror
            if np.any(cut):
                x = coords[cut]
                if neumann_outer and isinstance(spec, PerforatedCube):
                    d = spec.hole_axis_distance(x, k, step)
                else:
                    d = spec.axis_distance(x, k, step)
                theta[cut, k, side] = np.clip(d / h, 0.0, 1.0)
            neighbors[:, k, side] = j

    both = np.all(neighbors == MIRROR, axis=2)
    if np.any(both):
        raise UnresolvableFeatureError("grid is a single node thick between mirror faces")
    weights = np.prod(np.where(np.any(neighbors == MIRROR, axis=2), 0.5, 1.0), axis=1)
    return GridDomain(spec, h, np.asarray(anchor, float), index, coords, neighbors, theta, weights, reflected, neumann_outer)


@dataclass(eq=False)
class SparseOperator:
    """Symmetric discrete -Laplace ``A = W^{-1/2} K W^{-1/2}``.

    Fields on nodes ``u`` map to the symmetric frame as ``y = sqrt(W) u``.
    """

    matrix: sp.csr_matrix
    weights: np.ndarray
    h: float
    bc: str
    grid: GridDomain

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def to_field(self, y):
        return np.asarray(y) / self.sqrt_weights

    def from_field(self, u):
        return np.asarray(u) * self.sqrt_weights

    def torsion_rhs(self) -> np.ndarray:
        """Right-hand side of the symmetric torsion system (``-Lap v = 1``)."""
        return self.sqrt_weights.copy()

    def apply(self, u) -> np.ndarray:
        """The finite-difference operator applied to a nodal field."""
        return self.to_field(self.matrix @ self.from_field(u))

    def to_matrix_market(self, path) -> None:
        scipy.io.mmwrite(str(path), self.matrix.tocoo(), comment=f"bc={self.bc} h={self.h!r}", symmetry="symmetric")


def _assemble(grid: GridDomain, bc: str) -> SparseOperator:
    n, m, h = grid.n, grid.m, grid.h
    inv_h2 = 1.0 / h**2
    nb, th = grid.neighbors, grid.theta
    diag = np.zeros(n)
    rows, cols, vals = [], [], []
    for k in range(m):
        mir = nb[:, k, :] == MIRROR
        for side in (0, 1):
            j = nb[:, k, side]
            opp_mirror = mir[:, 1 - side]
            reg = j >= 0
            coef = np.where(opp_mirror, 2.0, 1.0) * inv_h2
            diag[reg] += inv_h2
            rows.append(np.flatnonzero(reg))
            cols.append(j[reg])
            vals.append(-coef[reg])
            cut = (j == DIRICHLET) & ~opp_mirror
            diag[cut] += inv_h2 / th[cut, k, side]
            # symmetric profile vanishing at +-theta*h across a mirror plane
            cut_m = (j == DIRICHLET) & opp_mirror
            diag[cut_m] += 2.0 * inv_h2 / th[cut_m, k, side] ** 2
            diag[j == MIRROR] += inv_h2
    idx = np.arange(n)
    rows = np.concatenate(rows + [idx])
    cols = np.concatenate(cols + [idx])
    vals = np.concatenate(vals + [diag])
    w = grid.weights
    # K = W * FD is exactly symmetric (weights are powers of two)
    kvals = w[rows] * vals
    avals = kvals / np.sqrt(w[rows] * w[cols])
    A = sp.csr_matrix((avals, (rows, cols)), shape=(n, n))
    A.sum_duplicates()
    A.sort_indices()
    return SparseOperator(A, w.copy(), h, bc, grid)


def assemble_dirichlet(grid: GridDomain) -> SparseOperator:
    """Symmetric (2m+1)-point operator with Dirichlet data on the domain boundary.

    Mirror nodes only appear on symmetry planes of a reduced grid.
    """
    if grid.neumann_outer:
        raise ValueError("grid was built with Neumann outer faces; use assemble_unit_cell")
    return _assemble(grid, "dirichlet")


def assemble_unit_cell(Lcell: float, delta: float, h: float, m: int = 2, symmetric: bool = False) -> SparseOperator:
    """Operator on the cube of side ``Lcell`` with Neumann faces and a Dirichlet ball of radius ``delta``.

    ``delta = 0`` gives the pure Neumann cube (singular operator).
    """
    if delta < 0 or delta >= Lcell / 2:
        raise ValueError("need 0 <= delta < Lcell/2")
    half = Lcell / (2 * h)
    if abs(half - round(half)) > 1e-9 * max(1.0, half):
        raise ValueError(f"Lcell/(2h) = {half} must be an integer so the faces lie on nodes")
    if delta == 0:
        spec = Box((Lcell,) * m, (-Lcell / 2,) * m)
        bc = "neumann"
    else:
        spec = PerforatedCube(m, Lcell, 1, delta)
        bc = "mixed"
    grid = build_grid(spec, h, symmetric=symmetric, neumann_outer=True)
    return _assemble(grid, bc)
