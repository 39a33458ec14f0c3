"""How close does the quantile-process density estimate get to the truth?

Under a pure-location null the conditional density at the alpha-th quantile
is the constant f(F^-1(alpha)), so both estimators can be scored directly:

  eg_mae          feasible estimate vs truth
  infeasible_mae  kernel estimate built from the true quantile function
  feasible_gap    mean |feasible - infeasible| (the cost of estimating Q)

The gap should shrink as n grows, and the feasible error with it.

Usage:
    uv run python -m scripts.density_oracle_study
    uv run python -m scripts.density_oracle_study --model 2 --errors t3 --reps 100
"""

import argparse
import logging
from pathlib import Path

from qrwald.simulation import density_study

logger = logging.getLogger(__name__)

OUT_DIR = Path(__file__).parent.parent / "reports"
SAMPLE_SIZES = [100, 300, 1000]
ALPHAS = [0.25, 0.5, 0.75]


def main():
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    parser = argparse.ArgumentParser(description="Density estimator accuracy study")
    parser.add_argument("--model", type=int, choices=[1, 2, 4, 5], default=1)
    parser.add_argument("--errors", choices=["normal", "t3"], default="normal")
    parser.add_argument("--reps", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    df = density_study(
        SAMPLE_SIZES,
        ALPHAS,
        model=args.model,
        replications=args.reps,
        base_seed=args.seed,
        F=args.errors,
    )
    OUT_DIR.mkdir(exist_ok=True)
    out_path = OUT_DIR / f"density_model{args.model}_{args.errors}.csv"
    df.to_csv(out_path, index=False, float_format="%.6g")
    logger.info(f"Wrote {out_path}")

    print("\n" + "=" * 60)
    print(f"DENSITY ACCURACY: model {args.model}, {args.errors} errors, {args.reps} reps")
    print("=" * 60)
    print(f"{'n':>6s} {'alpha':>6s} {'EG':>8s} {'infeas':>8s} {'gap':>8s} {'fail':>5s}")
    print("-" * 46)
    for row in df.itertuples(index=False):
        print(
            f"{row.n:>6d} {row.alpha:>6.2f} {row.eg_mae:>8.4f} {row.infeasible_mae:>8.4f} "
            f"{row.feasible_gap:>8.4f} {row.failures:>5d}"
        )


if __name__ == "__main__":
    main()
