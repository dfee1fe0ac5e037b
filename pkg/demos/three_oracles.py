"""Torsion at a point by finite differences, walk-on-spheres and the survival integral."""

from torsionlab.experiments import ExperimentConfig, run_oracle_check


def main():
    out = run_oracle_check(ExperimentConfig(experiment="oracle-check", n_walks=50_000))
    for r in out.rows:
        print(f"{r['domain']:<16} x={r['x']}  fd={r['fd']:.6f}  wos={r['wos_mean']:.6f}+-{r['wos_stderr']:.1e}"
              f"  survival={r['survival']:.6f}  agree={r['wos_ok'] and r['survival_ok']}")


if __name__ == "__main__":
    main()
