import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torsionlab import bounds as b
from torsionlab.geometry import Box, Disk, PerforatedCube
from torsionlab.solvers import SpectralResult


def fake_result(spec, lam, sup, err=0.0, h=0.01):
    return SpectralResult(spec=spec, h=h, lambda1=lam, sup_norm=sup, error_estimate=err, lambda_error=err,
                          sup_error=err)


class TestDimensionConstants:
    def test_general_sandwich(self):
        assert b.product_bounds(2) == pytest.approx((1.0, 8.15888), abs=1e-5)
        assert b.product_bounds(3)[1] == pytest.approx(10.2383, abs=1e-4)
        assert all(b.product_bounds(m)[0] == 1 for m in range(2, 10))

    def test_sharp_constant(self):
        assert b.SHARP_C == pytest.approx(4.84414, abs=1e-5)
        assert b.sharp_product_constant(2) == pytest.approx(2.10633, abs=1e-5)
        assert b.sharp_product_constant(4) == pytest.approx(2.71104, abs=1e-5)

    def test_sharp_below_general(self):
        for m in range(2, 11):
            assert b.sharp_product_constant(m) < b.product_bounds(m)[1]

    def test_dimension_guard(self):
        with pytest.raises(ValueError):
            b.product_bounds(1)

    def test_short_names(self):
        assert b.e5_bounds is b.product_bounds
        assert b.hv_constant(2) == b.sharp_product_constant(2)
        assert b.payne_lower() == pytest.approx(1.23370, abs=1e-5)


class TestConvex:
    def test_product_upper(self):
        assert b.convex_product_upper(1, 1) == pytest.approx(19.198, abs=1e-3)
        assert b.convex_product_upper(1, 10) == pytest.approx(5.104, abs=1e-3)
        assert b.convex_product_upper(1e-9, 1) == pytest.approx(math.pi**2 / 8, rel=1e-4)
        with pytest.raises(ValueError):
            b.convex_product_upper(2, 1)

    def test_inscribed_rectangle_lambda(self):
        sharp, relaxed = b.lambda_convex_upper(1, 8)
        assert sharp == pytest.approx(math.pi**2 * 1.25**3)
        assert b.lambda_convex_upper(1, 1)[0] == pytest.approx(8 * math.pi**2)
        assert sharp <= relaxed

    @given(st.floats(1e-3, 1e3), st.floats(1.0, 1e3))
    @settings(max_examples=100)
    def test_sharp_below_relaxed(self, w, ratio):
        sharp, relaxed = b.lambda_convex_upper(w, w * ratio)
        assert sharp <= relaxed * (1 + 1e-12)

    def test_slab_torsion(self):
        assert b.torsion_convex_upper(1) == 0.125
        assert b.torsion_convex_upper(2) == 0.5


class TestPerforated:
    def test_cell_eigenvalue_upper(self):
        r = b.cell_eigenvalue_upper(20, 2, 16, 1)
        assert r.rhs == pytest.approx(2120)
        assert r.valid
        assert not b.cell_eigenvalue_upper(20, 2, 9, 1).valid
        assert not b.cell_eigenvalue_upper(20, 2, 16, 1, delta=0.1).valid
        assert 32 * 3 * 1.25**3 == pytest.approx(187.5)

    def test_torsion_upper(self):
        r = b.torsion_perforated_upper(20, 2, 16, 1)
        assert r.rhs == pytest.approx(0.05 + 0.02795 + 0.006944, abs=1e-5)
        assert r.valid
        assert not b.torsion_perforated_upper(70, 2, 16, 1).valid
        assert b.torsion_perforated_upper(20, 2, 10**8, 1).rhs == pytest.approx(1 / 20, rel=1e-4)

    def test_product_upper(self):
        r = b.perforated_product_upper(20, 2, 16, 1)
        assert r.rhs == pytest.approx(179.97, abs=0.01)
        assert r.valid
        lo, hi = b.perforated_product_window(2, 16, 1)
        assert lo == 16 and hi == pytest.approx(65.2, abs=0.05)

    def test_product_upper_tends_to_one(self):
        vals = [b.perforated_product_upper(N ** (4 / 3), 2, N, 1).rhs for N in (10**6, 10**9, 10**12)]
        assert vals[0] > vals[1] > vals[2]
        assert vals[2] == pytest.approx(1.0, abs=0.2)

    def test_planar_window(self):
        N, L = 4, 1.0
        delta = L / (2 * N) / math.e
        w = b.mu1_two_sided_m2(delta, N, L)
        assert w.lo == pytest.approx(N**2 / 100)
        assert w.hi == pytest.approx(8 * math.pi / (4 - math.pi) * N**2)
        assert w.lo < w.hi
        # (L/2N)/e is just above L/(6N), so this radius lies outside the validity range
        assert not w.valid
        assert not b.mu1_two_sided_m2(L / (6 * N), N, L).valid
        assert b.mu1_two_sided_m2(0.99 * L / (6 * N), N, L).valid
        assert b.MU1_CONSTANT_M2 == 100

    def test_higher_dimensional_window(self):
        w = b.mu1_two_sided_m3plus(0.03125, 8, 1, 3, 2)
        assert (w.lo, w.hi) == pytest.approx((8, 32))
        w1 = b.mu1_two_sided_m3plus(0.03125, 8, 1, 3, 1)
        assert w1.lo == w1.hi
        assert b.mu1_two_sided_m3plus(6.2e-4, 8, 1, 3, 2).valid
        assert not b.mu1_two_sided_m3plus(6.3e-4, 8, 1, 3, 2).valid
        with pytest.raises(ValueError):
            b.mu1_two_sided_m3plus(0.01, 8, 1, 3, 0.5)

    def test_decay(self):
        assert b.perforated_decay_rate(8, 1) == pytest.approx(2.0)
        assert b.perforated_decay_rate(1000, 1) == pytest.approx(1.2)
        vals = [b.perforated_decay_rate(N, 0.7) for N in range(1, 50)]
        assert all(y < x for x, y in zip(vals, vals[1:]))
        with pytest.raises(ValueError):
            b.perforated_decay_rate(8, 0)

    @pytest.mark.parametrize("s", [0.5, 2, 10])
    def test_scale_invariance(self, s):
        mu1, m, N, L, delta = 37.0, 2, 16, 1.3, 0.01
        pairs = [
            (b.cell_eigenvalue_upper(mu1, m, N, L, delta), b.cell_eigenvalue_upper(mu1 / s**2, m, N, s * L, s * delta), s**-2),
            (b.torsion_perforated_upper(mu1, m, N, L), b.torsion_perforated_upper(mu1 / s**2, m, N, s * L), s**2),
            (b.perforated_product_upper(mu1, m, N, L), b.perforated_product_upper(mu1 / s**2, m, N, s * L), 1.0),
        ]
        for a, c, factor in pairs:
            assert c.rhs == pytest.approx(a.rhs * factor, rel=1e-12)
            assert c.valid == a.valid
        w, ws = b.mu1_two_sided_m2(delta, N, L), b.mu1_two_sided_m2(s * delta, N, s * L)
        assert (ws.lo, ws.hi) == pytest.approx((w.lo / s**2, w.hi / s**2), rel=1e-12)
        w, ws = b.mu1_two_sided_m3plus(delta, N, L, 3, 2), b.mu1_two_sided_m3plus(s * delta, N, s * L, 3, 2)
        assert (ws.lo, ws.hi) == pytest.approx((w.lo / s**2, w.hi / s**2), rel=1e-12)


class TestCheckAll:
    def test_square_entries(self, square_128):
        rep = b.check_all(square_128)
        assert rep.ok
        assert rep["product_lower"].satisfied and rep["product_upper"].satisfied
        assert rep["convex_product_lower"].lhs == pytest.approx(math.pi**2 / 8)
        assert "cell_lambda_upper" not in rep.names()

    def test_rectangle_upper_uses_measured_geometry(self):
        spec = Box((1.0, 10.0))
        rep = b.check_all(fake_result(spec, 9.968, 0.125))
        expected = math.pi**2 / 8 * (1 + 7 * 3 ** (2 / 3) * (1 / math.sqrt(101)) ** (2 / 3))
        assert rep["convex_product_upper"].rhs == pytest.approx(expected)

    def test_injected_fault(self):
        rep = b.check_all(fake_result(Disk(1.0), 5.783 / 2, 0.25, err=1e-5))
        assert not rep.ok
        assert "product_lower" in [e.name for e in rep.failures]

    def test_tolerance_policy(self):
        spec = Disk(1.0)
        exact = 1 / 0.25
        # product just below 1; tolerated only when the error estimate covers it
        assert not b.check_all(fake_result(spec, exact * 0.999, 0.25, err=1e-5))["product_lower"].satisfied
        assert b.check_all(fake_result(spec, exact * 0.999, 0.25, err=1e-3))["product_lower"].satisfied

    def test_margin(self):
        e = b.make_entry("x", "r", 1.0, 4.0)
        assert e.margin == pytest.approx(0.75)

    def test_perforated_without_cell_data(self):
        spec = PerforatedCube(2, 1.0, 4, 0.01)
        rep = b.check_all(fake_result(spec, 68.9, 0.0204))
        flagged = [e for e in rep.entries if e.ref == "perforated"]
        assert flagged and all(not e.preconditions_met for e in flagged)
        assert rep.ok
        assert "convex_product_lower" not in rep.names()

    def test_perforated_with_cell_data(self):
        spec = PerforatedCube(2, 1.0, 4, 0.01)
        aux = b.PerforatedAux(mu1=50.7, mu1_error=1e-4, cell_torsion_sup=0.0224, calC=1.0)
        rep = b.check_all(fake_result(spec, 68.9, 0.0204, err=1e-5), aux=aux)
        assert rep["neumann_cell_lower"].satisfied and rep["neumann_cell_lower"].preconditions_met
        assert not rep["cell_lambda_upper"].preconditions_met  # N < 10
        assert rep["cell_mu1_window_lower"].preconditions_met
        assert not rep["perforated_decay"].preconditions_met
        assert rep.context["calC"] == 1.0

    def test_three_dimensional_window_needs_constant(self):
        spec = PerforatedCube(3, 1.0, 2, 0.05)
        aux = b.PerforatedAux(mu1=10.0)
        rep = b.check_all(fake_result(spec, 20.0, 0.06), aux=aux)
        assert not rep["cell_mu1_window"].preconditions_met
        rep = b.check_all(fake_result(spec, 20.0, 0.06), aux=b.PerforatedAux(mu1=10.0, C=50.0))
        assert "cell_mu1_window_upper" in rep.names()

    def test_serialization(self, square_128):
        rep = b.check_all(square_128)
        d = json.loads(rep.to_json())
        assert d["ok"] is True
        assert {"name", "ref", "lhs", "rhs", "preconditions_met", "satisfied", "margin"} <= set(d["entries"][0])
        rows = list(csv.reader(io.StringIO(rep.to_csv())))
        assert rows[0] == ["name", "ref", "lhs", "rhs", "valid", "satisfied", "margin"]
        assert len(rows) == len(rep.entries) + 1
        assert float(rows[1][3]) == rep.entries[0].rhs
