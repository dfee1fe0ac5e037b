"""Torsion solves, principal eigenvalues and the spectral product.

All solvers work in the symmetric frame of :class:`SparseOperator`; fields
returned to callers are nodal values.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import __version__
from .discretize import GridDomain, SparseOperator, assemble_dirichlet, assemble_unit_cell, build_grid
from .geometry import Domain, domain_from_dict

__all__ = [
    "ConvergenceError",
    "SlowConvergenceWarning",
    "cg",
    "factorize",
    "solve_torsion",
    "Eigenpair",
    "principal_eigenvalue",
    "lowest_eigenvalues",
    "lanczos_probe",
    "richardson",
    "SpectralResult",
    "spectral_product",
    "CellResult",
    "unit_cell_spectrum",
]

CG_RTOL = 1e-10
EIG_RTOL = 1e-9


class ConvergenceError(RuntimeError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class SlowConvergenceWarning(RuntimeWarning):
    pass


class CGInfo(NamedTuple):
    iterations: int
    residual: float


def cg(A, b, x0=None, rtol=CG_RTOL, maxiter=None, jacobi=True):
    """Conjugate gradients for symmetric positive definite ``A``.

    Stops when ``||b - A x|| <= rtol ||b||``. The true residual is recomputed
    at exit so the reported value is not the recursively updated one.

    Returns
    -------
    x : ndarray
    info : CGInfo
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    maxiter = maxiter or max(10 * n, 1000)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), CGInfo(0, 0.0)
    dinv = 1.0 / A.diagonal() if jacobi else np.ones(n)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    target = rtol * bnorm
    it = 0
    while True:
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            # guard against drift of the recursive residual
            rnorm = np.linalg.norm(b - A @ x)
            if rnorm <= target:
                break
            r = b - A @ x
            z = dinv * r
            p = z.copy()
            rz = r @ z
        if it >= maxiter:
            raise ConvergenceError(
                f"CG did not converge in {it} iterations (relative residual {rnorm / bnorm:.3e})",
                iterations=it,
                residual=rnorm / bnorm,
            )
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    return x, CGInfo(it, rnorm / bnorm)


def factorize(op: SparseOperator, shift: float = 0.0):
    """Sparse LU of ``A - shift I``; returns a callable ``solve(b)``."""
    A = op.matrix if shift == 0 else op.matrix - shift * sp.identity(op.n, format="csr")
    lu = spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A")
    return lu.solve


def _relres(A, x, b):
    return float(np.linalg.norm(b - A @ x) / np.linalg.norm(b))


def solve_torsion(op: SparseOperator, method: str = "cg", rtol: float = CG_RTOL, factor=None, return_info=False):
    """Nodal torsion field ``v`` with ``-Lap_h v = 1`` and zero Dirichlet data.

    ``method="cg"`` uses Jacobi-preconditioned conjugate gradients;
    ``method="direct"`` uses a sparse factorization (``factor`` may be a
    solve callable from :func:`factorize`) followed by CG polishing if the
    residual misses ``rtol``.
    """
    if op.bc == "neumann":
        raise ValueError("torsion is undefined for the pure Neumann operator")
    A, b = op.matrix, op.torsion_rhs()
    if method == "cg":
        y, info = cg(A, b, rtol=rtol)
    elif method == "direct":
        solve = factor or factorize(op)
        y = solve(b)
        res = _relres(A, y, b)
        info = CGInfo(0, res)
        if res > rtol:
            y, info = cg(A, b, x0=y, rtol=rtol)
    else:
        raise ValueError(f"unknown method {method!r}")
    v = op.to_field(y)
    return (v, info) if return_info else v


class Eigenpair(NamedTuple):
    value: float
    vector: np.ndarray
    residual: float
    iterations: int
    ratio: float


def _lanczos_inverse(solve, v0, nev=1, tol=1e-10, max_basis=80, max_restarts=50):
    """Largest Ritz pairs of the inverse operator ``solve`` (full reorthogonalization, explicit restarts)."""
    n = len(v0)
    v = v0 / np.linalg.norm(v0)
    total = 0
    for _ in range(max_restarts):
        Q = np.empty((max_basis + 1, n))
        Q[0] = v
        alpha, beta = [], []
        converged = False
        for j in range(max_basis):
            w = solve(Q[j])
            total += 1
            a = Q[j] @ w
            w -= a * Q[j]
            if j > 0:
                w -= beta[-1] * Q[j - 1]
            for _ in range(2):
                w -= Q[: j + 1].T @ (Q[: j + 1] @ w)
            b = np.linalg.norm(w)
            alpha.append(a)
            theta, S = scipy.linalg.eigh_tridiagonal(np.array(alpha), np.array(beta)) if j > 0 else (
                np.array([a]),
                np.ones((1, 1)),
            )
            k = min(nev, j + 1)
            res = b * np.abs(S[-1, -k:])
            if j + 1 >= nev and np.all(res <= tol * theta[-1]):
                converged = True
                break
            if b <= 1e-14 * abs(theta[-1]):
                # invariant subspace: Ritz values are exact
                converged = True
                break
            beta.append(b)
            Q[j + 1] = w / b
        basis = Q[: j + 1]
        vecs = basis.T @ S[:, ::-1][:, : min(nev, j + 1)]
        if converged:
            return theta[::-1], vecs, total
        v = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
    raise ConvergenceError(f"Lanczos did not converge after {total} inverse applications", iterations=total)


def _basis_size(n, budget=4e8):
    return int(max(20, min(80, budget // (8 * max(n, 1)))))


def principal_eigenvalue(op: SparseOperator, method: str = "lanczos", tol: float = EIG_RTOL, factor=None,
                         maxiter: int = 5000) -> Eigenpair:
    """Lowest eigenvalue of a positive definite operator and its positive eigenvector.

    ``method="lanczos"`` runs inverse iteration inside a Krylov space (Lanczos
    on the factorized inverse) and polishes with one plain inverse step.
    ``method="power"`` is plain inverse power iteration with CG inner solves.
    Both start from the constant field and return the Rayleigh quotient of
    the final vector. The vector is a nodal field normalized so that its
    symmetric-frame image has unit Euclidean norm, with nonnegative sign.
    """
    A = op.matrix
    y0 = op.from_field(np.ones(op.n))
    if method == "lanczos":
        solve = factor or factorize(op)
        theta, vecs, its = _lanczos_inverse(solve, y0, nev=2, tol=1e-10, max_basis=_basis_size(op.n))
        y = solve(vecs[:, 0])
        its += 1
        y /= np.linalg.norm(y)
        ratio = float(theta[1] / theta[0]) if len(theta) > 1 else 0.0
        lam = float(y @ (A @ y))
        if abs(lam - 1.0 / theta[0]) > tol * lam:
            raise ConvergenceError(
                f"Ritz value {1 / theta[0]!r} and Rayleigh quotient {lam!r} disagree", iterations=its
            )
    elif method == "power":
        y = y0 / np.linalg.norm(y0)
        lam = float(y @ (A @ y))
        change_prev = None
        ratio = 0.0
        warned = False
        for its in range(1, maxiter + 1):
            y, _ = cg(A, y, x0=y / lam, rtol=min(CG_RTOL, 0.01 * tol))
            y /= np.linalg.norm(y)
            new = float(y @ (A @ y))
            change = abs(new - lam)
            lam = new
            if change_prev:
                ratio = math.sqrt(min(change / change_prev, 1.0))
                if ratio > 0.95 and its > 20 and not warned:
                    warnings.warn(
                        f"inverse iteration converging slowly (eigenvalue ratio estimate {ratio:.4f}); "
                        "lowest pair is nearly degenerate",
                        SlowConvergenceWarning,
                        stacklevel=2,
                    )
                    warned = True
            if change <= tol * lam:
                break
            change_prev = change
        else:
            raise ConvergenceError(f"inverse iteration did not converge in {maxiter} steps", iterations=maxiter)
    else:
        raise ValueError(f"unknown method {method!r}")
    if y.sum() < 0:
        y = -y
    residual = float(np.linalg.norm(A @ y - lam * y))
    return Eigenpair(lam, op.to_field(y), residual, its, ratio)


def lowest_eigenvalues(op: SparseOperator, k: int = 2, sigma: float | None = None, seed: int = 0) -> np.ndarray:
    """The ``k`` lowest eigenvalues by ARPACK in shift-invert mode around ``sigma``.

    Repeated eigenvalues are returned with their multiplicity. A pure Neumann
    operator is singular, so its default shift is negative.
    """
    if sigma is None:
        lo, hi = op.grid.spec.bounds()
        sigma = -1.0 / float(np.max(hi - lo)) ** 2 if op.bc == "neumann" else 0.0
    solve = factorize(op, shift=sigma)
    n = op.n
    if k >= n - 1:
        return np.sort(np.linalg.eigvalsh(op.matrix.toarray()))[:k]
    inv = spla.LinearOperator((n, n), matvec=solve, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    vals = spla.eigsh(op.matrix, k=k, sigma=sigma, which="LM", OPinv=inv, v0=v0,
                                     return_eigenvectors=False, tol=1e-12)
    return np.sort(vals)


def lanczos_probe(A, steps: int = 50, seed: int = 0) -> float:
    """Smallest Ritz value of ``A`` after ``steps`` Lanczos steps (positivity probe)."""
    n = A.shape[0]
    steps = min(steps, n)
    rng = np.random.default_rng(seed)
    Q = np.empty((steps, n))
    q = rng.standard_normal(n)
    Q[0] = q / np.linalg.norm(q)
    alpha, beta = [], []
    for j in range(steps):
        w = A @ Q[j]
        a = Q[j] @ w
        w -= a * Q[j]
        if j > 0:
            w -= beta[-1] * Q[j - 1]
        w -= Q[: j + 1].T @ (Q[: j + 1] @ w)
        alpha.append(a)
        b = np.linalg.norm(w)
        if j == steps - 1 or b < 1e-13 * abs(a):
            break
        beta.append(b)
        Q[j + 1] = w / b
    theta = scipy.linalg.eigh_tridiagonal(np.array(alpha), np.array(beta[: len(alpha) - 1]), eigvals_only=True)
    return float(theta[0])


def richardson(value_h: float, value_h2: float, order: int = 2) -> tuple[float, float]:
    """Extrapolate from spacings ``h`` and ``h/2``.

    Returns ``(extrapolated, error_estimate)`` with the estimate being the
    relative distance of the finer value from the extrapolation.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if value_h == value_h2:
        return float(value_h2), 0.0
    extrap = value_h2 + (value_h2 - value_h) / (2**order - 1)
    if extrap == 0:
        return float(extrap), math.inf
    return float(extrap), float(abs(value_h2 - extrap) / abs(extrap))


@dataclass(eq=False)
class SpectralResult:
    """Principal eigenvalue, torsion field and their product on one grid.

    Error estimates are Richardson-based and relative; they are 0 when no
    coarse companion solve was requested.
    """

    spec: Domain
    h: float
    lambda1: float
    sup_norm: float
    eigvec: np.ndarray | None = None
    torsion: np.ndarray | None = None
    residuals: dict = field(default_factory=dict)
    error_estimate: float = 0.0
    lambda_error: float = 0.0
    sup_error: float = 0.0
    extrapolated: dict = field(default_factory=dict)
    n_nodes: int = 0
    reduced: bool = False
    tolerances: dict = field(default_factory=lambda: {"cg_rtol": CG_RTOL, "eig_rtol": EIG_RTOL})
    seconds: float = 0.0
    grid: GridDomain | None = field(default=None, repr=False)

    @property
    def product(self) -> float:
        return self.lambda1 * self.sup_norm

    def to_dict(self) -> dict:
        return {
            "domain": self.spec.to_dict(),
            "h": self.h,
            "lambda1": self.lambda1,
            "sup_norm": self.sup_norm,
            "product": self.product,
            "error_estimate": self.error_estimate,
            "lambda_error": self.lambda_error,
            "sup_error": self.sup_error,
            "extrapolated": self.extrapolated,
            "residuals": self.residuals,
            "n_nodes": self.n_nodes,
            "reduced": self.reduced,
            "tolerances": self.tolerances,
            "seconds": self.seconds,
            "version": __version__,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralResult":
        # product is derived, never trusted from the file
        return cls(
            spec=domain_from_dict(d["domain"]),
            h=d["h"],
            lambda1=d["lambda1"],
            sup_norm=d["sup_norm"],
            residuals=d.get("residuals", {}),
            error_estimate=d.get("error_estimate", 0.0),
            lambda_error=d.get("lambda_error", 0.0),
            sup_error=d.get("sup_error", 0.0),
            extrapolated=d.get("extrapolated", {}),
            n_nodes=d.get("n_nodes", 0),
            reduced=d.get("reduced", False),
            tolerances=d.get("tolerances", {"cg_rtol": CG_RTOL, "eig_rtol": EIG_RTOL}),
            seconds=d.get("seconds", 0.0),
        )

    def field_csv(self, path, which="torsion") -> None:
        """Write ``index, coordinates, value`` rows for the torsion or eigenvector field."""
        values = self.torsion if which == "torsion" else self.eigvec
        if values is None or self.grid is None:
            raise ValueError("result carries no field data")
        _write_field_csv(path, self.grid, values)


def _write_field_csv(path, grid, values):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node"] + [f"x{k}" for k in range(grid.m)] + ["value"])
        for i in range(grid.n):
            w.writerow([i, *(f"{c:.17g}" for c in grid.coords[i]), f"{values[i]:.17g}"])


def _solve_pair(spec, h, reduce, keep_fields):
    grid = build_grid(spec, h, symmetric=reduce)
    op = assemble_dirichlet(grid)
    solve = factorize(op)
    eig = principal_eigenvalue(op, factor=solve)
    v, info = solve_torsion(op, method="direct", factor=solve, return_info=True)
    del solve
    out = {
        "lambda1": eig.value,
        "sup": float(v.max()),
        "eig_residual": eig.residual,
        "eig_iterations": eig.iterations,
        "torsion_residual": info.residual,
        "gap_ratio": eig.ratio,
        "n": op.n,
    }
    if keep_fields:
        out.update(eigvec=eig.vector, torsion=v, grid=grid)
    return out


def spectral_product(spec: Domain, h: float, richardson_check: bool = True, reduce: bool | str = "auto",
                     keep_fields: bool = True) -> SpectralResult:
    """Principal eigenvalue, torsion sup norm and their product at spacing ``h``.

    With ``richardson_check`` a companion solve at ``2h`` supplies Richardson
    error estimates for the values at ``h``. ``reduce="auto"`` solves on the
    upper orthant of reflection-symmetric domains; the ground state and the
    torsion function are symmetric, so the discrete values are unchanged.
    """
    t0 = time.perf_counter()
    if reduce == "auto":
        reduce = spec.reflection_symmetric
    fine = _solve_pair(spec, h, bool(reduce), keep_fields)
    res = SpectralResult(
        spec=spec,
        h=h,
        lambda1=fine["lambda1"],
        sup_norm=fine["sup"],
        eigvec=fine.get("eigvec"),
        torsion=fine.get("torsion"),
        grid=fine.get("grid"),
        n_nodes=fine["n"],
        reduced=bool(reduce),
        residuals={
            "torsion_relative": fine["torsion_residual"],
            "eigen_absolute": fine["eig_residual"],
            "eigen_iterations": fine["eig_iterations"],
            "gap_ratio": fine["gap_ratio"],
        },
    )
    if richardson_check:
        coarse = _solve_pair(spec, 2 * h, bool(reduce), False)
        lam_x, lam_e = richardson(coarse["lambda1"], fine["lambda1"])
        sup_x, sup_e = richardson(coarse["sup"], fine["sup"])
        prod_x, prod_e = richardson(coarse["lambda1"] * coarse["sup"], res.product)
        res.lambda_error, res.sup_error, res.error_estimate = lam_e, sup_e, prod_e
        res.extrapolated = {"lambda1": lam_x, "sup_norm": sup_x, "product": prod_x, "coarse_h": 2 * h}
    res.seconds = time.perf_counter() - t0
    return res


@dataclass
class CellResult:
    """Unit-cell quantities: Neumann faces, Dirichlet central ball."""

    Lcell: float
    delta: float
    h: float
    mu1: float
    torsion_sup: float
    mu1_error: float = 0.0
    torsion_error: float = 0.0
    n_nodes: int = 0

    def to_dict(self):
        return dict(self.__dict__)


def _cell_pair(Lcell, delta, h, m, reduce):
    op = assemble_unit_cell(Lcell, delta, h, m=m, symmetric=reduce)
    solve = factorize(op)
    eig = principal_eigenvalue(op, factor=solve)
    v = solve_torsion(op, method="direct", factor=solve)
    return eig.value, float(v.max()), op.n


def unit_cell_spectrum(Lcell: float, delta: float, h: float, m: int = 2, richardson_check: bool = True,
                       reduce: bool = True) -> CellResult:
    """Lowest mixed eigenvalue and mixed torsion sup norm of the unit cell.

    The mixed ground state and torsion are symmetric, so the reduced cell
    (one orthant) gives the same discrete values.
    """
    mu, sup, n = _cell_pair(Lcell, delta, h, m, reduce)
    out = CellResult(Lcell, delta, h, mu, sup, n_nodes=n)
    if richardson_check:
        mu_c, sup_c, _ = _cell_pair(Lcell, delta, 2 * h, m, reduce)
        out.mu1_error = richardson(mu_c, mu)[1]
        out.torsion_error = richardson(sup_c, sup)[1]
    return out
