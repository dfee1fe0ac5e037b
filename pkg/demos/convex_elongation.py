"""Stretch a rectangle and an ellipse and watch lambda * sup(v) approach pi^2/8."""

import math

from torsionlab.experiments import ExperimentConfig, run_convex_sweep


def main():
    out = run_convex_sweep(ExperimentConfig(experiment="convex-sweep", aspect_ratios=[1, 2, 5, 10, 20]))
    limit = math.pi**2 / 8
    print(f"slab limit pi^2/8 = {limit:.5f}")
    print(f"{'shape':<10}{'aspect':>7}{'product':>10}{'upper bound':>13}{'gap to limit':>14}")
    for r in out.rows:
        print(f"{r['shape']:<10}{r['aspect']:>7g}{r['product']:>10.5f}{r['convex_upper']:>13.4f}"
              f"{(r['product'] - limit) / limit:>14.3%}")
    for shape, t in out.report["trends"].items():
        print(f"{shape}: strictly decreasing = {t['strictly_decreasing']}")


if __name__ == "__main__":
    main()
