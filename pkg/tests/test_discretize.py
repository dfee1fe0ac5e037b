import itertools
import math

import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from oracles import neumann_square_eigenvalues, rectangle_eigenvalues
from torsionlab.discretize import (
    UnresolvableFeatureError,
    assemble_dirichlet,
    assemble_unit_cell,
    build_grid,
)
from torsionlab.geometry import Box, ConvexPolygon, Disk, Ellipse, PerforatedCube, delta_star
from torsionlab.solvers import lanczos_probe, lowest_eigenvalues, principal_eigenvalue, solve_torsion


def brute_force_count(spec, h, anchor):
    lo, hi = spec.bounds()
    ks = [np.arange(math.floor((lo[k] - anchor[k]) / h) - 1, math.ceil((hi[k] - anchor[k]) / h) + 2)
          for k in range(spec.m)]
    pts = np.array(list(itertools.product(*ks)), float) * h + anchor
    return int(spec.contains(pts).sum())


class TestBuildGrid:
    def test_square_node_count(self):
        assert build_grid(Box((1.0, 1.0)), 0.25).n == 9

    def test_disk_node_count(self):
        assert build_grid(Disk(1.0), 0.5).n == 9

    @pytest.mark.parametrize(
        "spec,h",
        [(Disk(1.0), 0.07), (Ellipse(1.0, 0.4), 0.03), (ConvexPolygon([(0, 0), (1, 0), (0.3, 0.9)]), 0.02),
         (PerforatedCube(2, 1.0, 2, 0.1), 1 / 96)],
    )
    def test_matches_enumeration(self, spec, h):
        g = build_grid(spec, h)
        # nodes closer than the theta floor to the boundary are dropped
        assert g.n + g.clamped == brute_force_count(spec, h, g.anchor)
        assert np.all(spec.contains(g.coords))

    def test_theta_range(self):
        g = build_grid(Disk(1.0), 0.05)
        assert np.all(g.theta > 0) and np.all(g.theta <= 1)
        assert np.any(g.theta < 1)

    def test_unresolvable_hole(self):
        ds = delta_star(2, 4 / 3, 8, 1.0)
        spec = PerforatedCube(2, 1.0, 8, ds.delta)
        with pytest.raises(UnresolvableFeatureError) as info:
            build_grid(spec, 1 / 64)
        assert info.value.max_h == pytest.approx(ds.delta / 4)

    def test_empty_interior(self):
        with pytest.raises(ValueError):
            build_grid(Box((1.0, 1.0)), 1.0)

    def test_grid_csv(self, tmp_path):
        g = build_grid(Disk(1.0), 0.25)
        g.to_csv(tmp_path / "g.csv")
        lines = (tmp_path / "g.csv").read_text().splitlines()
        assert lines[0].startswith("node,x0,x1,theta0-")
        assert len(lines) == g.n + 1


class TestDirichletOperator:
    def test_single_node(self):
        op = assemble_dirichlet(build_grid(Box((1.0, 1.0)), 0.5))
        assert op.matrix.toarray() == pytest.approx(np.array([[16.0]]))

    def test_symmetric(self):
        for spec in (Disk(1.0), Ellipse(1.0, 0.5), PerforatedCube(2, 1.0, 2, 0.08)):
            for reduce in (False, True):
                A = assemble_dirichlet(build_grid(spec, 1 / 64, symmetric=reduce)).matrix
                diff = abs(A - A.T).max()
                assert diff <= 1e-12 * abs(A).max()

    def test_symmetric_random_vectors(self):
        op = assemble_dirichlet(build_grid(Ellipse(1.0, 0.6), 1 / 40))
        rng = np.random.default_rng(2)
        u, w = rng.normal(size=(2, op.n))
        a, b = w @ (op.matrix @ u), u @ (op.matrix @ w)
        assert abs(a - b) <= 1e-12 * abs(a)

    def test_row_sums(self):
        op = assemble_dirichlet(build_grid(Disk(1.0), 1 / 16))
        rs = op.apply(np.ones(op.n))
        g = op.grid
        near = np.any(g.neighbors < 0, axis=(1, 2))
        assert np.all(rs[near] > 0)
        assert np.allclose(rs[~near], 0, atol=1e-9)

    def test_positive_definite_probe(self):
        op = assemble_dirichlet(build_grid(Disk(1.0), 1 / 32))
        assert lanczos_probe(op.matrix, steps=50) > 0

    def test_consistency_on_sine(self):
        errs = []
        for h in (1 / 16, 1 / 32):
            op = assemble_dirichlet(build_grid(Box((1.0, 1.0)), h))
            x, y = op.grid.coords.T
            u = np.sin(np.pi * x) * np.sin(np.pi * y)
            errs.append(np.abs(op.apply(u) - 2 * np.pi**2 * u).max())
        assert errs[1] < errs[0] / 3.5

    def test_long_rectangle_eigenvalue(self):
        op = assemble_dirichlet(build_grid(Box((1.0, 10.0)), 1 / 32, symmetric=True))
        lam = principal_eigenvalue(op).value
        assert lam == pytest.approx(rectangle_eigenvalues(1, 10, 1)[0], rel=2e-3)

    def test_maximum_principle(self):
        for spec in (Disk(1.0), PerforatedCube(2, 1.0, 3, 0.03)):
            op = assemble_dirichlet(build_grid(spec, 1 / 160))
            assert np.all(solve_torsion(op) > 0)

    def test_reduced_grid_matches_full(self):
        spec = PerforatedCube(2, 1.0, 2, 0.06)
        full = assemble_dirichlet(build_grid(spec, 1 / 80))
        half = assemble_dirichlet(build_grid(spec, 1 / 80, symmetric=True))
        assert half.n < full.n / 3
        a, b = principal_eigenvalue(full).value, principal_eigenvalue(half).value
        assert a == pytest.approx(b, rel=1e-10)
        assert solve_torsion(full).max() == pytest.approx(solve_torsion(half).max(), rel=1e-9)

    def test_matrix_market(self, tmp_path):
        op = assemble_dirichlet(build_grid(Disk(1.0), 0.25))
        op.to_matrix_market(tmp_path / "a.mtx")
        B = scipy.io.mmread(str(tmp_path / "a.mtx"))
        assert abs(sp.csr_matrix(B) - op.matrix).max() < 1e-14

    def test_neumann_grid_rejected(self):
        g = build_grid(Box((1.0, 1.0), (-0.5, -0.5)), 1 / 8, neumann_outer=True)
        with pytest.raises(ValueError):
            assemble_dirichlet(g)


class TestUnitCell:
    def test_pure_neumann_spectrum(self):
        op = assemble_unit_cell(1.0, 0.0, 1 / 64)
        vals = lowest_eigenvalues(op, k=4)
        ref = neumann_square_eigenvalues(1.0, 4)
        assert abs(vals[0]) < 1e-8
        # pi^2 is double, the next level is 2 pi^2
        assert vals[1:] == pytest.approx(ref[1:], rel=2e-3)

    def test_mu1_in_two_sided_window(self):
        from torsionlab.bounds import mu1_two_sided_m2

        op = assemble_unit_cell(1.0, 0.125, 1 / 128, symmetric=True)
        mu = principal_eigenvalue(op).value
        win = mu1_two_sided_m2(0.125, 1, 1.0)
        assert win.valid
        assert win.lo <= mu <= win.hi

    def test_symmetric_and_positive(self):
        op = assemble_unit_cell(0.5, 0.05, 1 / 160)
        A = op.matrix
        assert abs(A - A.T).max() <= 1e-12 * abs(A).max()
        assert lanczos_probe(A) > 0

    def test_faces_must_be_on_nodes(self):
        with pytest.raises(ValueError, match="integer"):
            assemble_unit_cell(1.0, 0.1, 0.3)

    def test_radius_range(self):
        with pytest.raises(ValueError):
            assemble_unit_cell(1.0, 0.5, 1 / 64)

    def test_reduced_cell_matches_full(self):
        full = principal_eigenvalue(assemble_unit_cell(0.5, 0.05, 1 / 160)).value
        half = principal_eigenvalue(assemble_unit_cell(0.5, 0.05, 1 / 160, symmetric=True)).value
        assert full == pytest.approx(half, rel=1e-10)
