import csv
import io
import json

import pytest

from torsionlab.experiments import (
    MAX_NODES,
    ConfigError,
    ExperimentConfig,
    convex_h,
    default_corpus,
    perforated_h,
    run_convex_sweep,
    run_eig,
    run_oracle_check,
    run_perforated_sweep,
    run_product,
    run_survival,
    run_torsion,
    run_verify_bounds,
    run_wos,
)
from torsionlab.geometry import Box, Disk, Ellipse, delta_star

SQUARE = Box((1.0, 1.0)).to_dict()


def cfg(**kw):
    c = ExperimentConfig(**kw)
    c.validate()
    return c


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_dict({"experiment": "product", "colour": "red"})

    @pytest.mark.parametrize(
        "kw",
        [{"experiment": "nope"}, {"h": -1.0}, {"experiment": "convex-sweep", "aspect_ratios": [0.5]},
         {"experiment": "convex-sweep", "shapes": ["triangle"]}, {"experiment": "perforated-sweep", "N": []},
         {"threads": 0}],
    )
    def test_validation(self, kw):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kw).validate()

    def test_missing_domain(self):
        with pytest.raises(ConfigError):
            run_product(cfg())

    def test_bad_domain(self):
        with pytest.raises(ConfigError):
            run_product(cfg(domain={"variant": "torus"}))

    def test_from_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"experiment": "eig", "domain": SQUARE, "h": 0.0625}))
        c = ExperimentConfig.from_file(p)
        assert c.experiment == "eig" and c.h == 0.0625
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "missing.json")


class TestSpacingRules:
    def test_convex(self):
        assert convex_h(Box((1.0, 10.0))) == 1 / 128
        assert convex_h(Disk(1.0)) == 2 / 128
        assert convex_h(Ellipse(2.5, 0.5)) == 1 / 128

    @pytest.mark.parametrize("N", [2, 3, 4, 6])
    def test_perforated(self, N):
        d = delta_star(2, 4 / 3, N, 1.0).delta
        h = perforated_h(1.0, N, d)
        M = round(1 / h)
        assert h <= min(d / 8, 1 / (64 * N)) * (1 + 1e-12)
        assert M % 8 == 0 and M % (4 * N) == 0

    def test_six_holes_per_side(self):
        d = delta_star(2, 4 / 3, 6, 1.0).delta
        assert round(1 / perforated_h(1.0, 6, d)) == 2616


class TestSingleDomain:
    def test_product_rows_are_stamped(self):
        out = run_product(cfg(domain=SQUARE, h=1 / 32, seed=4))
        row = out.rows[0]
        assert row["h"] == 1 / 32 and row["seed"] == 4 and "version" in row
        assert out.report["product"] == pytest.approx(1.4542, rel=1e-2)

    def test_eig(self):
        out = run_eig(cfg(domain=SQUARE, h=1 / 32))
        assert set(out.columns) >= {"lambda1", "h", "seed"}
        assert "sup_norm" not in out.report

    def test_torsion_probes(self):
        out = run_torsion(cfg(domain=SQUARE, h=1 / 64, points=[[0.5, 0.5], [0.25, 0.5]]))
        assert len(out.rows) == 2
        assert out.rows[0]["value"] == pytest.approx(0.0736713, rel=2e-3)

    def test_wos(self):
        out = run_wos(cfg(domain=Disk(1.0).to_dict(), n_walks=10))
        assert out.rows[0]["mean"] == pytest.approx(0.25)

    def test_wos_outside(self):
        with pytest.raises(ConfigError):
            run_wos(cfg(domain=Disk(1.0).to_dict(), points=[[3.0, 0.0]], n_walks=10))

    def test_survival(self):
        out = run_survival(cfg(domain=SQUARE, h=1 / 32, dt=2e-3))
        assert out.report["tail_ok"] and not out.failed
        assert out.csv_text().startswith("t,u0\n")

    def test_survival_short_horizon_flagged(self):
        out = run_survival(cfg(domain=SQUARE, h=1 / 32, dt=2e-3, t_max=0.04))
        assert out.failed


class TestConvexSweep:
    def test_small_sweep(self, tmp_path):
        out = run_convex_sweep(cfg(experiment="convex-sweep", aspect_ratios=[1, 4], shapes=["rectangle"], h=1 / 32))
        assert not out.failed
        assert out.report["trends"]["rectangle"]["strictly_decreasing"]
        paths = out.write(tmp_path, "sweep")
        rows = list(csv.DictReader(io.StringIO(paths[1].read_text())))
        assert [float(r["aspect"]) for r in rows] == [1.0, 4.0]

    def test_csv_is_reproducible(self):
        c = cfg(experiment="convex-sweep", aspect_ratios=[2], shapes=["ellipse"], h=1 / 32)
        assert run_convex_sweep(c).csv_text() == run_convex_sweep(c).csv_text()

    def test_threads_do_not_change_rows(self):
        kw = dict(experiment="convex-sweep", aspect_ratios=[1, 2], shapes=["rectangle"], h=1 / 32)
        a = run_convex_sweep(cfg(**kw)).csv_text()
        b = run_convex_sweep(cfg(threads=2, **kw)).csv_text()
        assert a == b


class TestPerforatedSweep:
    def test_refuses_unresolvable_member(self):
        out = run_perforated_sweep(cfg(experiment="perforated-sweep", N=[2, 40]))
        assert out.report["max_feasible_N"] == 2
        assert out.report["refused"]["N"] == 40
        assert len(out.rows) == 1
        row = out.rows[0]
        assert row["neumann_lower_ok"] and row["mu1_in_window"]

    def test_nothing_resolvable(self):
        with pytest.raises(ConfigError, match="resolvable"):
            run_perforated_sweep(cfg(experiment="perforated-sweep", N=[3], h=0.05))

    def test_node_limit(self):
        assert MAX_NODES > 1_000_000


class TestVerifyBounds:
    def test_empty_corpus(self):
        with pytest.raises(ConfigError, match="no domains"):
            run_verify_bounds(cfg(experiment="verify-bounds", corpus=[]))

    def test_default_corpus_contents(self):
        variants = [d["variant"] for d in default_corpus()]
        assert len(variants) == 5 and variants[-1] == "perforated_cube"

    def test_small_corpus_passes(self):
        out = run_verify_bounds(cfg(experiment="verify-bounds", corpus=[SQUARE, Disk(1.0).to_dict()], h=1 / 32))
        assert not out.failed and out.report["failures"] == 0
        names = {r["name"] for r in out.rows}
        assert {"product_lower", "product_upper", "convex_product_upper"} <= names

    def test_replay_with_fault(self, tmp_path):
        good = run_product(cfg(domain=SQUARE, h=1 / 32)).report
        bad = dict(good, lambda1=good["lambda1"] / 2)
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(bad))
        out = run_verify_bounds(cfg(experiment="verify-bounds", corpus=[], replay=[str(p)]))
        assert out.failed
        failing = {r["name"] for r in out.rows if r["valid"] and not r["satisfied"]}
        assert "product_lower" in failing


class TestOracleCheck:
    def test_square_center(self):
        out = run_oracle_check(cfg(experiment="oracle-check", domain=SQUARE, h=1 / 64, n_walks=20_000,
                                   points=[[0.5, 0.5]]))
        assert out.report["all_agree"], out.rows
