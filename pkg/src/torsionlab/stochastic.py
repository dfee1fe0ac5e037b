"""Probabilistic estimates of the torsion function.

The torsion function is the mean exit time of Brownian motion with
generator Delta. Two independent routes are provided: walk-on-spheres
Monte Carlo and the time integral of the survival probability, computed
from the heat equation on the finite-difference grid.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import __version__
from .discretize import assemble_dirichlet, build_grid
from .geometry import Domain
from .solvers import principal_eigenvalue

__all__ = [
    "WosEstimate",
    "wos_torsion",
    "SurvivalCurve",
    "survival_curve",
    "survival_torsion",
    "TailTooLargeError",
    "BLOCK_SIZE",
    "MAX_STEPS",
]

BLOCK_SIZE = 4096
MAX_STEPS = 100_000
DEFAULT_SHELL_FRACTION = 1e-4


@dataclass
class WosEstimate:
    mean: float
    stderr: float
    n_walks: int
    eps_shell: float
    seed: int
    mean_steps: float
    n_discarded: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["version"] = __version__
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    # counter-based stream per (seed, block); blocks have a fixed size so the
    # draws a walk sees do not depend on how blocks are scheduled
    return np.random.Generator(np.random.Philox(key=[seed % 2**64, block]))


def _run_block(spec, x, count, eps, seed, block, max_steps):
    rng = _block_rng(seed, block)
    m = spec.m
    pos = np.tile(x, (count, 1))
    total = np.zeros(count)
    steps = np.zeros(count, dtype=np.int64)
    alive = np.arange(count)
    r = np.asarray(spec.distance(pos), dtype=float).reshape(count)
    first = True
    while alive.size:
        ra = r[alive]
        if not first:
            keep = ra >= eps
            alive, ra = alive[keep], ra[keep]
            capped = steps[alive] >= max_steps
            if capped.any():
                steps[alive[capped]] = -1
                alive, ra = alive[~capped], ra[~capped]
            if not alive.size:
                break
        first = False
        total[alive] += ra**2 / (2 * m)
        steps[alive] += 1
        g = rng.standard_normal((alive.size, m))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        pos[alive] += ra[:, None] * g
        r[alive] = spec.distance(pos[alive])
    ok = steps >= 0
    return total[ok], steps[ok], int((~ok).sum())


def wos_torsion(spec: Domain, x, n_walks: int = 100_000, eps_shell: float | None = None, seed: int = 0,
                max_steps: int = MAX_STEPS, threads: int = 1) -> WosEstimate:
    """Walk-on-spheres estimate of the torsion function at ``x``.

    Each walk jumps to a uniform point on the largest sphere inside the
    domain and accrues the mean exit time ``r^2/(2m)`` of that ball. The
    first jump is always taken; afterwards a walk stops once it is within
    ``eps_shell`` of the boundary. Walks longer than ``max_steps`` are
    discarded and counted in ``n_discarded``.

    Parameters
    ----------
    eps_shell : float, optional
        Absorption shell width; default ``1e-4 * diameter``.
    threads : int
        Worker threads. The estimate does not depend on this value.
    """
    x = np.asarray(x, dtype=float).reshape(spec.m)
    if not bool(np.all(spec.contains(x[None, :]))):
        raise ValueError("starting point lies outside the domain")
    if n_walks < 1:
        raise ValueError("n_walks >= 1")
    if eps_shell is None:
        eps_shell = DEFAULT_SHELL_FRACTION * spec.diameter()
    if eps_shell <= 0:
        raise ValueError("eps_shell must be positive")
    sizes = [min(BLOCK_SIZE, n_walks - s) for s in range(0, n_walks, BLOCK_SIZE)]
    jobs = [(spec, x, c, eps_shell, seed, b, max_steps) for b, c in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda a: _run_block(*a), jobs))
    else:
        parts = [_run_block(*a) for a in jobs]
    times = np.concatenate([p[0] for p in parts])
    steps = np.concatenate([p[1] for p in parts])
    discarded = sum(p[2] for p in parts)
    if times.size == 0:
        raise RuntimeError("every walk exceeded the step cap")
    sd = times.std(ddof=1) if times.size > 1 else 0.0
    return WosEstimate(float(times.mean()), float(sd / math.sqrt(times.size)), int(n_walks), float(eps_shell),
                       int(seed), float(steps.mean()), int(discarded))


# --- heat semigroup ------------------------------------------------------------


class TailTooLargeError(RuntimeError):
    """The analytic tail past ``t_max`` is too large a share of the integral."""


@dataclass
class SurvivalCurve:
    """Survival probabilities ``u(x; t)`` at probe points, plus the time integral."""

    t: np.ndarray
    u: np.ndarray  # shape (len(t), n_points)
    points: np.ndarray
    integral: np.ndarray
    tail: np.ndarray
    lambda1: float
    h: float
    dt: float

    @property
    def tail_fraction(self) -> np.ndarray:
        return self.tail / (self.integral + self.tail)

    @property
    def torsion(self) -> np.ndarray:
        return self.integral + self.tail

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"u{k}" for k in range(len(self.points))])
        for ti, row in zip(self.t, self.u):
            w.writerow([repr(float(ti))] + [repr(float(v)) for v in row])
        return buf.getvalue()


def survival_curve(spec: Domain, points, h: float, dt: float, t_max: float, reduce: bool | str = "auto",
                   rannacher_steps: int = 4) -> SurvivalCurve:
    """Heat-equation survival probabilities ``u(x; t)`` with ``u(., 0) = 1``.

    Time stepping is Crank-Nicolson, started with ``rannacher_steps``
    backward-Euler half steps to damp the incompatible initial data. Both
    step types use the matrix ``I + (dt/2) A``, which is factored once.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if reduce == "auto":
        reduce = spec.reflection_symmetric
    grid = build_grid(spec, h, symmetric=bool(reduce))
    op = assemble_dirichlet(grid)
    A = op.matrix
    lam = principal_eigenvalue(op).value
    half = 0.5 * dt
    M = (sp.identity(op.n, format="csc") + half * A).tocsc()
    lu = splu(M, permc_spec="MMD_AT_PLUS_A")
    y = op.sqrt_weights.copy()
    sw = op.sqrt_weights
    ts = [0.0]
    us = [grid.sample(y / sw, points)]
    t = 0.0
    if t_max > 0:
        for k in range(rannacher_steps):
            y = lu.solve(y)
            t = (k + 1) * half
            ts.append(t)
            us.append(grid.sample(y / sw, points))
        t0 = t
        n_cn = max(0, int(math.ceil((t_max - t0) / dt - 1e-9)))
        for k in range(n_cn):
            y = lu.solve(y - half * (A @ y))
            t = t0 + (k + 1) * dt
            ts.append(t)
            us.append(grid.sample(y / sw, points))
    ts = np.array(ts)
    us = np.array(us)
    integral = np.trapezoid(us, ts, axis=0) if len(ts) > 1 else np.zeros(len(points))
    tail = us[-1] / lam
    return SurvivalCurve(ts, us, points, integral, tail, lam, h, dt)


def survival_torsion(spec: Domain, x, h: float, dt: float, t_max: float, max_tail_fraction: float = 0.05,
                     reduce: bool | str = "auto") -> float:
    """Torsion value at ``x`` as the time integral of the survival probability.

    The integral runs to ``t_max`` by the trapezoid rule and is closed with
    the tail ``u(x; t_max) / lambda``.

    Raises
    ------
    TailTooLargeError
        If the tail exceeds ``max_tail_fraction`` of the total.
    """
    x = np.asarray(x, dtype=float)
    if not bool(np.all(spec.contains(x.reshape(1, -1)))):
        raise ValueError("probe point lies outside the domain")
    curve = survival_curve(spec, x, h, dt, t_max, reduce=reduce)
    frac = float(curve.tail_fraction[0])
    if frac > max_tail_fraction:
        raise TailTooLargeError(f"tail is {frac:.1%} of the integral; increase t_max")
    return float(curve.torsion[0])
