"""Command-line entry point.

Usage:
    uv run qrwald fit --input data.csv --response y --alpha 0.5 --intercept
    uv run qrwald test --input data.csv --response y --alpha 0.5 --restrict d_x1
    uv run qrwald curve --input data.csv --response y --grid 0.2:0.8:300 \\
        --restrict d_x1 --out curve --svg
    uv run qrwald curve --profile penn --input Penn46.ascii --grid 0.2:0.8:300 --out penn
    uv run qrwald simulate --config sim.conf --out table1.csv
    uv run qrwald sample --model 1 --n 300 --a 1.5 --seed 7 --out sample.csv

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

import argparse
import logging
import logging.config
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

from . import config
from .data_loader import (
    build_restriction,
    load_csv,
    load_penn,
    load_restriction_file,
    write_dataset_csv,
)
from .dgp import generate_sample
from .errors import QRWaldError, UsageError
from .plotting import write_pvalue_svg
from .qr_solver import fit_rq
from .schemas import Dataset, DGPSpec, EGConfig, Restriction, RunSpec, WaldResult
from .simulation import emit_report, parse_sim_config, run_experiment
from .wald import pvalue_curve, run_test

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["alpha", "statistic", "df", "p_value", "status"]


def configure_logging(path: str | None = None, level: int = logging.INFO) -> None:
    if path:
        with open(path) as fh:
            logging.config.dictConfig(yaml.safe_load(fh))
        return
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr)


def _grid(value: str) -> tuple[float, float, int]:
    try:
        lo, hi, count = value.split(":")
        return float(lo), float(hi), int(count)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected LO:HI:COUNT, got {value!r}") from e


def _names(value: str) -> list[str]:
    return [name.strip() for name in value.split(",") if name.strip()]


def _add_data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", dest="input_path", help="CSV or whitespace-separated file")
    parser.add_argument("--response", help="Name of the response column")
    parser.add_argument("--intercept", action="store_true", help="Add a column of ones")
    parser.add_argument("--profile", choices=["penn"], help="Known data layout")


def _add_test_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--method", choices=sorted(config.METHODS), default="weg", help="G estimator"
    )
    parser.add_argument("--restrict", type=_names, default=[], help="c1,c2,... jointly zero")
    parser.add_argument("--restrict-file", help="CSV of R rows by column name plus rhs")
    parser.add_argument("--tau", type=float, default=config.NOMINAL_TAU, help="Nominal level")
    eg = parser.add_argument_group("EG density estimator")
    eg.add_argument("--k", type=float, default=config.K)
    eg.add_argument("--c", type=float, default=config.C)
    eg.add_argument("--m", type=int, help="Override the grid size")
    eg.add_argument("--h", type=float, help="Override the bandwidth")
    eg.add_argument("--a1", type=float, default=config.A1)
    eg.add_argument("--a2", type=float, default=config.A2)
    eg.add_argument("--level-mode", choices=["equispaced", "iid-uniform"], default="equispaced")
    eg.add_argument(
        "--kernel",
        choices=["epanechnikov", "epanechnikov-half"],
        default=config.KERNEL,
        help="Kernel over quantile-process contrasts (support [-1, 1] or [-1/2, 1/2])",
    )
    eg.add_argument("--seed", type=int, default=0, help="Seed for iid-uniform levels")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrwald", description="Wald tests on regression quantiles"
    )
    parser.add_argument("--log-config", help="YAML logging configuration")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="Fit one regression quantile")
    _add_data_args(fit)
    fit.add_argument("--alpha", type=float, required=True)
    fit.add_argument("--out", dest="output_path", help="Coefficient CSV (default stdout)")

    test = sub.add_parser("test", help="Wald test at one quantile")
    _add_data_args(test)
    _add_test_args(test)
    test.add_argument("--alpha", type=float, required=True)
    test.add_argument("--out", dest="output_path", help="Result CSV (default stdout)")

    curve = sub.add_parser("curve", help="p-values over a grid of quantiles")
    _add_data_args(curve)
    _add_test_args(curve)
    curve.add_argument("--grid", type=_grid, required=True, help="LO:HI:COUNT")
    curve.add_argument("--out", dest="output_path", required=True, help="Output stem")
    curve.add_argument("--svg", action="store_true", help="Also write <out>.svg")

    simulate = sub.add_parser("simulate", help="Monte Carlo size and power")
    simulate.add_argument("--config", dest="input_path", required=True)
    simulate.add_argument("--out", dest="output_path", required=True)

    sample = sub.add_parser("sample", help="Write a simulated dataset")
    sample.add_argument("--model", type=int, default=1, choices=range(1, 7))
    sample.add_argument("--n", type=int, default=300)
    sample.add_argument("--a", type=float, default=0.0)
    sample.add_argument("--alpha", type=float, default=0.5, help="Level the null is centred at")
    sample.add_argument("--errors", choices=["normal", "t3"], default="normal")
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--out", dest="output_path", required=True)
    return parser


def _run_spec(args: argparse.Namespace) -> RunSpec:
    fields = {
        key: value
        for key, value in vars(args).items()
        if key in RunSpec.model_fields and value is not None
    }
    if args.command in ("test", "curve"):
        fields["nominal_tau"] = args.tau
        fields["eg_config"] = EGConfig(
            a1=args.a1,
            a2=args.a2,
            k=args.k,
            c=args.c,
            m_override=args.m,
            h_override=args.h,
            level_mode=args.level_mode,
            kernel=args.kernel,
            seed=args.seed,
        )
    if args.command == "sample":
        fields.pop("alpha", None)
    return RunSpec(**fields)


def _load(spec: RunSpec) -> tuple[Dataset, Restriction | None]:
    if spec.profile == "penn":
        data, restr = load_penn(spec.input_path)
    else:
        data, restr = load_csv(spec.input_path, spec.response, intercept=spec.intercept), None
    if spec.restrict_file:
        restr = load_restriction_file(spec.restrict_file, data)
    elif spec.restrict:
        restr = build_restriction(data, spec.restrict)
    return data, restr


def _taus(spec: RunSpec) -> tuple[float, ...]:
    return tuple(sorted({*config.REJECT_LEVELS, spec.nominal_tau}))


def _result_frame(results: list[WaldResult]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "alpha": r.alpha,
                "statistic": r.statistic,
                "df": r.J,
                "p_value": r.p_value,
                "status": r.status,
            }
            for r in results
        ],
        columns=CURVE_COLUMNS,
    )


def _write(df: pd.DataFrame, path: str | None) -> None:
    if path:
        df.to_csv(path, index=False, float_format="%.17g")
        logger.info(f"Wrote {len(df)} rows to {path}")
    else:
        df.to_csv(sys.stdout, index=False, float_format="%.10g")


def cmd_fit(spec: RunSpec) -> None:
    data, _ = _load(spec)
    fit = fit_rq(data, spec.alpha)
    logger.info(
        f"alpha={spec.alpha}: objective={fit.objective:.6g}, "
        f"{fit.iterations} iterations, vertex={fit.vertex}"
    )
    _write(pd.DataFrame({"column": data.column_names, "coefficient": fit.beta}), spec.output_path)


def cmd_test(spec: RunSpec) -> None:
    data, restr = _load(spec)
    result = run_test(
        data,
        restr,
        spec.alpha,
        spec.method,
        spec.eg_config,
        taus=_taus(spec),
        n_jobs=config.thread_count(),
    )
    verdict = "reject" if result.reject_at[spec.nominal_tau] else "do not reject"
    logger.info(
        f"{result.method}: W={result.statistic:.4f}, df={result.J}, "
        f"p={result.p_value:.4g} ({verdict} at {spec.nominal_tau})"
    )
    _write(_result_frame([result]), spec.output_path)


def cmd_curve(spec: RunSpec) -> None:
    data, restr = _load(spec)
    results = pvalue_curve(
        data,
        restr,
        spec.levels(),
        spec.method,
        spec.eg_config,
        taus=_taus(spec),
        n_jobs=config.thread_count(),
    )
    failed = sum(not r.ok for r in results)
    if failed:
        logger.warning(f"{failed} of {len(results)} grid points failed")
    # suffixes are appended: run.v2 -> run.v2.csv
    stem = Path(spec.output_path)
    _write(_result_frame(results), str(stem.with_name(stem.name + ".csv")))
    if spec.svg:
        write_pvalue_svg(results, stem.with_name(stem.name + ".svg"))


def cmd_simulate(spec: RunSpec) -> None:
    sim = parse_sim_config(spec.input_path)
    logger.info(
        f"Simulating models={sim.models} sizes={sim.sample_sizes} alphas={sim.alphas} "
        f"a={sim.a_values} methods={sim.methods} reps={sim.replications}"
    )
    emit_report(run_experiment(sim), spec.output_path)


def cmd_sample(args: argparse.Namespace) -> None:
    dgp = DGPSpec(model=args.model, a=args.a, alpha_star=args.alpha, F=args.errors, n=args.n)
    data, _ = generate_sample(dgp, np.random.default_rng(args.seed))
    write_dataset_csv(data, args.output_path)
    logger.info(f"Wrote model {dgp.model} sample (n={dgp.n}, a={dgp.a}) to {args.output_path}")


COMMANDS = {
    "fit": cmd_fit,
    "test": cmd_test,
    "curve": cmd_curve,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return UsageError.exit_code if e.code else 0

    configure_logging(args.log_config, logging.DEBUG if args.verbose else logging.INFO)
    try:
        spec = _run_spec(args)
        if spec.command == "sample":
            cmd_sample(args)
        else:
            COMMANDS[spec.command](spec)
    except ValidationError as e:
        logger.error(f"Invalid arguments: {e.errors()[0]['msg']}")
        return UsageError.exit_code
    except QRWaldError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{e}")
        return 3
    return 0
