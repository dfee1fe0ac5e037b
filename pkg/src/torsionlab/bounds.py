"""Closed-form inequality evaluators and a checker against computed spectra.

Every evaluator is a pure function of its arguments. Constants that are only
known to exist (the two-sided constant for m >= 3 and the decay constant of
the perforated family) are inputs and are never defaulted.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

from .geometry import (
    Box,
    ConvexPolygon,
    Disk,
    Domain,
    Ellipse,
    PerforatedCube,
    measure_convex,
    newtonian_capacity_constant,
)

__all__ = [
    "SHARP_C",
    "MU1_CONSTANT_M2",
    "product_bounds",
    "sharp_product_constant",
    "convex_product_lower",
    "convex_product_upper",
    "lambda_convex_upper",
    "torsion_convex_upper",
    "cell_eigenvalue_upper",
    "torsion_perforated_upper",
    "perforated_product_upper",
    "perforated_product_window",
    "mu1_two_sided_m2",
    "mu1_two_sided_m3plus",
    "perforated_decay_rate",
    "perforated_decay_general",
    "BoundEntry",
    "BoundReport",
    "PerforatedAux",
    "check_all",
    "e5_bounds",
    "hv_constant",
    "payne_lower",
    "theorem2_rhs",
    "lemma2_rhs",
    "product_upper_e62",
    "decay_rate_e73",
]

SHARP_C = math.sqrt(5 * (4 + math.log(2)))
MU1_CONSTANT_M2 = max(100.0, 8 * math.pi / (4 - math.pi))


class Bound(NamedTuple):
    rhs: float
    valid: bool


class Window(NamedTuple):
    lo: float
    hi: float
    valid: bool


def product_bounds(m: int) -> tuple[float, float]:
    """``(1, 4 + 3 m log 2)``: the sandwich ``1 <= lambda ||v|| <= upper``."""
    if m < 2:
        raise ValueError("m >= 2")
    return 1.0, 4 + 3 * m * math.log(2)


def sharp_product_constant(m: int) -> float:
    """Sharper dimension constant ``(m + c sqrt(m) + 8) / 8`` with ``c = sqrt(5 (4 + log 2))``."""
    if m < 2:
        raise ValueError("m >= 2")
    return (m + SHARP_C * math.sqrt(m) + 8) / 8


def convex_product_lower() -> float:
    """Lower bound of ``lambda ||v||`` for convex domains (attained by slabs)."""
    return math.pi**2 / 8


def convex_product_upper(w: float, diam: float) -> float:
    """Upper bound of ``lambda ||v||`` for planar convex sets of width ``w`` and diameter ``diam``."""
    if not 0 < w <= diam:
        raise ValueError("need 0 < w <= diam")
    return math.pi**2 / 8 * (1 + 7 * 3 ** (2 / 3) * (w / diam) ** (2 / 3))


def lambda_convex_upper(w: float, chord: float) -> tuple[float, float]:
    """Eigenvalue upper bounds from an inscribed rectangle.

    Returns ``(sharp, relaxed)`` with ``sharp = pi^2/w^2 (1 + (w/L)^(2/3))^3``
    and ``relaxed = pi^2/w^2 (1 + 7 (w/L)^(2/3))``; ``sharp <= relaxed``.
    """
    if not 0 < w <= chord:
        raise ValueError("need 0 < w <= chord")
    x = (w / chord) ** (2 / 3)
    base = math.pi**2 / w**2
    return base * (1 + x) ** 3, base * (1 + 7 * x)


def torsion_convex_upper(w: float) -> float:
    """Sup of the slab torsion function for width ``w``."""
    return w**2 / 8


def _cell_bound_coef(m):
    return 32 * m * 1.25**m


def cell_eigenvalue_upper(mu1: float, m: int, N: int, L: float, delta: float | None = None) -> Bound:
    """Upper bound on the perforated-cube eigenvalue in terms of the unit-cell eigenvalue ``mu1``.

    Valid when ``N >= 10``, ``N/L^2 <= mu1`` and ``delta <= L/(4N)`` (the last
    check is skipped if ``delta`` is not given).
    """
    rhs = mu1 + _cell_bound_coef(m) * (N / L**2 + mu1 / math.sqrt(N))
    valid = N >= 10 and N / L**2 <= mu1 and (delta is None or delta <= L / (4 * N))
    return Bound(rhs, bool(valid))


def torsion_perforated_upper(mu1: float, m: int, N: int, L: float) -> Bound:
    """Upper bound on the perforated-cube torsion sup norm, valid for ``mu1 <= 3e N^2/(16 m L^2)``."""
    rhs = 1 / mu1 + math.sqrt(2 * m) * L / (math.sqrt(mu1) * N) + (4 / 3) ** m * L**2 / N**2
    return Bound(rhs, bool(mu1 <= 3 * math.e * N**2 / (16 * m * L**2)))


def perforated_product_window(m: int, N: int, L: float) -> tuple[float, float]:
    """Admissible ``mu1`` interval for the product bound."""
    return N / L**2, 3 * math.e * N**2 / (16 * m * L**2)


def perforated_product_upper(mu1: float, m: int, N: int, L: float, delta: float | None = None) -> Bound:
    """Product of the eigenvalue and torsion bounds; valid on the intersection of both windows."""
    lam = cell_eigenvalue_upper(mu1, m, N, L, delta)
    tor = torsion_perforated_upper(mu1, m, N, L)
    return Bound(lam.rhs * tor.rhs, lam.valid and tor.valid)


def mu1_two_sided_m2(delta: float, N: int, L: float) -> Window:
    """Planar two-sided estimate of the unit-cell eigenvalue, valid for ``delta < L/(6N)``."""
    valid = delta < L / (6 * N)
    log_term = math.log(L / (2 * delta * N))
    scale = N**2 / (L**2 * log_term)
    return Window(scale / 100, 8 * math.pi / (4 - math.pi) * scale, bool(valid))


def mu1_two_sided_m3plus(delta: float, N: int, L: float, m: int, C: float) -> Window:
    """``C^{-1} (N/L)^m delta^(m-2) <= mu1 <= C (N/L)^m delta^(m-2)`` under the small-capacity condition."""
    if m < 3:
        raise ValueError("m >= 3")
    if C < 1:
        raise ValueError("C >= 1")
    center = (N / L) ** m * delta ** (m - 2)
    valid = newtonian_capacity_constant(m) * delta ** (m - 2) <= (L / N) ** (m - 2) / 16
    return Window(center / C, center * C, bool(valid))


def perforated_decay_rate(N: int, calC: float) -> float:
    """``1 + 2 calC N^(-1/3)``: product bound for the exponent 4/3."""
    if calC <= 0:
        raise ValueError("calC must be positive")
    return 1 + 2 * calC * N ** (-1 / 3)


def perforated_decay_general(N: int, alpha: float, calC: float) -> float:
    """``1 + calC (N^(1-alpha) + N^((alpha-2)/2))``."""
    if calC <= 0:
        raise ValueError("calC must be positive")
    return 1 + calC * (N ** (1 - alpha) + N ** ((alpha - 2) / 2))


# --- report ---------------------------------------------------------------------


@dataclass
class BoundEntry:
    name: str
    ref: str
    lhs: float
    rhs: float
    preconditions_met: bool
    satisfied: bool
    margin: float
    tolerance: float = 0.0

    @property
    def failed(self) -> bool:
        return self.preconditions_met and not self.satisfied


def make_entry(name, ref, lhs, rhs, preconditions_met=True, rel_err=0.0) -> BoundEntry:
    """``lhs <= rhs`` with slack ``3 * rel_err * max(|lhs|, |rhs|)``."""
    tol = 3 * rel_err * max(abs(lhs), abs(rhs))
    margin = (rhs - lhs) / rhs if rhs != 0 else math.copysign(math.inf, rhs - lhs)
    return BoundEntry(name, ref, float(lhs), float(rhs), bool(preconditions_met), bool(lhs <= rhs + tol), float(margin), float(tol))


CSV_COLUMNS = ["name", "ref", "lhs", "rhs", "valid", "satisfied", "margin"]


@dataclass
class BoundReport:
    entries: list = field(default_factory=list)
    context: dict = field(default_factory=dict)

    @property
    def failures(self) -> list:
        return [e for e in self.entries if e.failed]

    @property
    def ok(self) -> bool:
        return not self.failures

    def __getitem__(self, name) -> BoundEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def names(self):
        return [e.name for e in self.entries]

    def to_dict(self):
        return {"entries": [asdict(e) for e in self.entries], "context": self.context, "ok": self.ok}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for e in self.entries:
            w.writerow([e.name, e.ref, repr(e.lhs), repr(e.rhs), e.preconditions_met, e.satisfied, repr(e.margin)])
        return buf.getvalue()


@dataclass
class PerforatedAux:
    """Unit-cell data and caller-supplied constants for perforated checks."""

    mu1: float | None = None
    mu1_error: float = 0.0
    cell_torsion_sup: float | None = None
    C: float | None = None
    calC: float | None = None


def _is_convex(spec):
    return isinstance(spec, (Box, Disk, Ellipse, ConvexPolygon))


def check_all(result, spec: Domain | None = None, aux: PerforatedAux | None = None) -> BoundReport:
    """Confront a :class:`~torsionlab.solvers.SpectralResult` with every applicable inequality.

    Convex entries appear only for convex domains, perforated entries only
    for perforated cubes. Missing unit-cell data yields entries flagged as
    not meeting their preconditions.
    """
    spec = spec or result.spec
    m = spec.m
    lam, sup, prod = result.lambda1, result.sup_norm, result.product
    ep, el, es = result.error_estimate, result.lambda_error, result.sup_error
    entries = []
    add = entries.append

    lower, upper = product_bounds(m)
    add(make_entry("product_lower", "general", lower, prod, True, ep))
    add(make_entry("product_upper", "general", prod, upper, True, ep))
    add(make_entry("product_upper_sharp", "general", prod, sharp_product_constant(m), True, ep))

    context = {"domain": spec.to_dict(), "h": result.h, "error_estimate": ep, "lambda_error": el, "sup_error": es}

    if _is_convex(spec):
        add(make_entry("convex_product_lower", "convex", convex_product_lower(), prod, True, ep))
        if m == 2:
            meas = measure_convex(spec)
            w, d, chord = meas.width, meas.diameter, meas.chord
            context.update(width=w, diameter=d, chord=chord)
            add(make_entry("convex_product_upper", "convex", prod, convex_product_upper(w, d), True, ep))
            sharp, relaxed = lambda_convex_upper(w, chord)
            add(make_entry("inscribed_rectangle_lambda", "convex", lam, sharp, True, el))
            add(make_entry("inscribed_rectangle_lambda_relaxed", "convex", lam, relaxed, True, el))
            add(make_entry("diameter_vs_chord", "convex", d, 3 * chord, True, 0.0))
        else:
            w = min(spec.sides) if isinstance(spec, Box) else 2 * spec.radius
        add(make_entry("slab_torsion_upper", "convex", sup, torsion_convex_upper(w), True, es))

    if isinstance(spec, PerforatedCube):
        aux = aux or PerforatedAux()
        N, L, delta = spec.N, spec.L, spec.delta
        context.update(N=N, L=L, delta=delta, mu1=aux.mu1, mu1_error=aux.mu1_error, C=aux.C, calC=aux.calC)
        if aux.mu1 is None:
            for name, ref in (("cell_lambda_upper", "perforated"), ("cell_torsion_upper", "perforated"),
                              ("cell_product_upper", "perforated"), ("neumann_cell_lower", "perforated")):
                add(BoundEntry(name, ref, math.nan, math.nan, False, False, math.nan))
        else:
            mu1, emu = aux.mu1, aux.mu1_error
            b = cell_eigenvalue_upper(mu1, m, N, L, delta)
            add(make_entry("cell_lambda_upper", "perforated", lam, b.rhs, b.valid, max(el, emu)))
            b = torsion_perforated_upper(mu1, m, N, L)
            add(make_entry("cell_torsion_upper", "perforated", sup, b.rhs, b.valid, max(es, emu)))
            b = perforated_product_upper(mu1, m, N, L, delta)
            add(make_entry("cell_product_upper", "perforated", prod, b.rhs, b.valid, max(ep, emu)))
            # Dirichlet outer faces only raise the eigenvalue above the periodic-cell one
            add(make_entry("neumann_cell_lower", "perforated", mu1, lam, True, max(el, emu)))
            if m == 2:
                win = mu1_two_sided_m2(delta, N, L)
                add(make_entry("cell_mu1_window_lower", "perforated", win.lo, mu1, win.valid, emu))
                add(make_entry("cell_mu1_window_upper", "perforated", mu1, win.hi, win.valid, emu))
            elif aux.C is not None:
                win = mu1_two_sided_m3plus(delta, N, L, m, aux.C)
                add(make_entry("cell_mu1_window_lower", "perforated", win.lo, mu1, win.valid, emu))
                add(make_entry("cell_mu1_window_upper", "perforated", mu1, win.hi, win.valid, emu))
            else:
                add(BoundEntry("cell_mu1_window", "perforated", mu1, math.nan, False, False, math.nan))
        if aux.cell_torsion_sup is not None:
            add(make_entry("neumann_cell_torsion", "perforated", sup, aux.cell_torsion_sup, True, es))
        if aux.calC is not None and aux.mu1 is not None:
            # the decay estimate is asymptotic; only claimed inside the product-bound window
            pre = perforated_product_upper(aux.mu1, m, N, L, delta).valid
            add(make_entry("perforated_decay", "perforated", prod, perforated_decay_rate(N, aux.calC), pre, ep))

    return BoundReport(entries, context)


# alternate short names
e5_bounds = product_bounds
hv_constant = sharp_product_constant
payne_lower = convex_product_lower
theorem2_rhs = convex_product_upper
lemma2_rhs = cell_eigenvalue_upper
product_upper_e62 = perforated_product_upper
decay_rate_e73 = perforated_decay_rate
