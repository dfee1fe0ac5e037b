"""Perforated square at the near-extremal hole radius for a few hole counts.

The product should drift toward 1 as N grows, but the radius shrinks like
exp(-N^(2/3)), so only small N are resolvable. With an odd N a hole sits at
the centre of the square where the torsion function would otherwise peak, and
the sequence is not monotone.
"""

import sys

from torsionlab.experiments import ExperimentConfig, run_perforated_sweep


def main(Ns=(2, 3, 4, 6)):
    out = run_perforated_sweep(ExperimentConfig(experiment="perforated-sweep", N=list(Ns)))
    print(f"{'N':>3}{'delta':>12}{'h':>12}{'mu1':>10}{'lambda1':>10}{'sup v':>10}{'product':>10}")
    for r in out.rows:
        print(f"{r['N']:>3}{r['delta']:>12.4e}{r['h']:>12.3e}{r['mu1']:>10.3f}{r['lambda1']:>10.3f}"
              f"{r['sup_norm']:>10.5f}{r['product']:>10.5f}")
    rep = out.report
    print(f"decreasing within tolerance: {rep['decreasing_within_tolerance']}")
    print(f"all below the square ({rep['square_product']:.4f}): {rep['below_square']}")
    print(rep["note"])


if __name__ == "__main__":
    main([int(a) for a in sys.argv[1:]] or (2, 3, 4, 6))
