"""Monte Carlo size and size-corrected power experiments.

Each replication owns a numpy Generator seeded from
SeedSequence(base_seed, spawn_key=(model, n, alpha, replication)). The key
omits ``a`` and the method, so every a-value and every method in a cell sees
the same X, D and U draws. Power runs are therefore seed-matched to the null
runs that calibrate their empirical critical value.

Usage:
    uv run qrwald simulate --config sim.conf --out table.csv
"""

import logging
import math
import time
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import ValidationError

from . import config
from .density import (
    bandwidth_h,
    compute_H,
    draw_levels,
    eg_density,
    estimate_G,
    estimate_G_oracle,
    grid_size_m,
    infeasible_density,
)
from .dgp import generate_sample, true_beta
from .errors import ConfigError, EmptyReport, QRWaldError
from .numerics import chi2_sf, normal_pdf, normal_quantile, student_t_quantile
from .qr_solver import fit_process, fit_rq
from .schemas import CellStatus, DGPSpec, EGConfig, SimConfig, SimReport, SimRow
from .wald import wald_test

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "model",
    "n",
    "alpha",
    "a",
    "method",
    "raw_pct",
    "size_corrected_pct",
    "reps",
    "cpu_mean_s",
    "failures",
]

FAILURE_WARN_SHARE = 0.01


def replication_rng(base_seed: int, spec: DGPSpec, rep: int) -> np.random.Generator:
    key = (spec.model, spec.n, int(round(spec.alpha_star * 1_000_000)), rep)
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=key))


def _replicate(
    spec: DGPSpec, rep: int, base_seed: int, methods: list[str], cfg: EGConfig
) -> dict[str, tuple[float | None, float]]:
    """Statistic and CPU seconds per method for one simulated sample."""
    rng = replication_rng(base_seed, spec, rep)
    alpha = spec.alpha_star

    start = time.process_time()
    try:
        data, restr = generate_sample(spec, rng)
        if cfg.level_mode == "iid-uniform":
            cfg = cfg.model_copy(update={"seed": int(rng.integers(2**63 - 1))})
        fit = fit_rq(data, alpha)
    except QRWaldError as e:
        logger.debug(f"replication {rep}: sample or fit failed: {e}")
        return {method: (None, 0.0) for method in methods}
    fit_seconds = time.process_time() - start
    H = compute_H(data)

    out: dict[str, tuple[float | None, float]] = {}
    for method in methods:
        start = time.process_time()
        try:
            if method == "oracle":
                G = estimate_G_oracle(data, alpha, true_beta(spec), cfg)
            else:
                G = estimate_G(data, alpha, method, cfg, fit=fit)
            statistic = wald_test(fit, G, H, restr, data.n).statistic
        except QRWaldError as e:
            logger.debug(f"replication {rep} {method}: {e}")
            statistic = None
        out[method] = (statistic, fit_seconds + time.process_time() - start)
    return out


def empirical_critical_value(null_stats: np.ndarray, tau: float) -> float:
    """The ceil((1 - tau) N)-th order statistic; rejecting above it has rate <= tau."""
    ordered = np.sort(np.asarray(null_stats, dtype=float))
    k = math.ceil((1.0 - tau) * ordered.size - 1e-9)
    if ordered.size == 0:
        return math.nan
    if k <= 0:
        return -math.inf
    return float(ordered[k - 1])


def _pct(flags: np.ndarray) -> float | None:
    return float(100.0 * np.mean(flags)) if flags.size else None


def _run_cell(
    spec: DGPSpec, cfg: SimConfig, n_jobs: int
) -> list[dict[str, tuple[float | None, float]]]:
    methods = list(cfg.methods)
    if n_jobs == 1:
        return [
            _replicate(spec, rep, cfg.base_seed, methods, cfg.eg_config)
            for rep in range(cfg.replications)
        ]
    return Parallel(n_jobs=n_jobs)(
        delayed(_replicate)(spec, rep, cfg.base_seed, methods, cfg.eg_config)
        for rep in range(cfg.replications)
    )


def run_experiment(cfg: SimConfig, *, n_jobs: int | None = None) -> SimReport:
    n_jobs = n_jobs or config.thread_count()
    tau = cfg.nominal_tau
    rows: list[SimRow] = []

    for model in cfg.models:
        for n in cfg.sample_sizes:
            for alpha in cfg.alphas:
                results: dict[float, list[dict[str, tuple[float | None, float]]]] = {}
                for a in cfg.a_values:
                    spec = DGPSpec(model=model, a=a, alpha_star=alpha, F=cfg.F, n=n)
                    results[a] = _run_cell(spec, cfg, n_jobs)
                rows.extend(_summarise(model, n, alpha, results, cfg, tau))

    return SimReport(rows=rows, base_seed=cfg.base_seed, nominal_tau=tau)


def _summarise(
    model: int,
    n: int,
    alpha: float,
    results: dict[float, list[dict[str, tuple[float | None, float]]]],
    cfg: SimConfig,
    tau: float,
) -> list[SimRow]:
    rows = []
    for method in cfg.methods:
        null_stats = np.array(
            [r[method][0] for r in results[0.0] if r[method][0] is not None], dtype=float
        )
        critical = empirical_critical_value(null_stats, tau)

        for a in cfg.a_values:
            cell = results[a]
            stats = np.array(
                [r[method][0] for r in cell if r[method][0] is not None], dtype=float
            )
            failures = len(cell) - stats.size
            if failures > FAILURE_WARN_SHARE * len(cell):
                logger.warning(
                    f"model={model} n={n} alpha={alpha:.2f} a={a:.2f} method={method}: "
                    f"{failures} of {len(cell)} replications failed"
                )
            p_values = np.array([chi2_sf(s, 1) for s in stats])
            raw = _pct(p_values < tau)
            if a == 0.0:
                corrected = raw
            elif null_stats.size:
                corrected = _pct(stats > critical)
            else:
                corrected = None
            status = _cell_status(stats.size, null_stats.size)
            if status != "ok":
                logger.warning(
                    f"model={model} n={n} alpha={alpha:.2f} a={a:.2f} method={method}: "
                    f"rejection rates unavailable ({status})"
                )
            cpu = float(np.mean([r[method][1] for r in cell]))

            logger.info(
                f"cell model={model} n={n} alpha={alpha:.2f} a={a:.2f} "
                f"method={method} done reps={len(cell)} rej={_fmt_pct(raw)}"
            )
            rows.append(
                SimRow(
                    model=model,
                    n=n,
                    alpha=alpha,
                    a=a,
                    method=method,
                    raw_rejection_pct=raw,
                    size_corrected_rejection_pct=corrected,
                    replications=len(cell),
                    cpu_seconds_mean=cpu,
                    failures=failures,
                    status=status,
                )
            )
    return rows


def _cell_status(usable: int, usable_null: int) -> CellStatus:
    if usable == 0:
        return "all_failed"
    if usable_null == 0:
        return "null_failed"
    return "ok"


def _fmt_pct(value: float | None) -> str:
    return "" if pd.isna(value) else f"{value:.1f}"


def report_frame(report: SimReport) -> pd.DataFrame:
    if not report.rows:
        raise EmptyReport("the simulation report has no rows")
    df = pd.DataFrame([row.model_dump() for row in report.rows])
    df = df.sort_values(["model", "n", "alpha", "method", "a"], kind="stable")
    return pd.DataFrame(
        {
            "model": df["model"],
            "n": df["n"],
            "alpha": df["alpha"].map(lambda v: f"{v:g}"),
            "a": df["a"].map(lambda v: f"{v:.2f}"),
            "method": df["method"],
            "raw_pct": df["raw_rejection_pct"].map(_fmt_pct),
            "size_corrected_pct": df["size_corrected_rejection_pct"].map(_fmt_pct),
            "reps": df["replications"],
            "cpu_mean_s": df["cpu_seconds_mean"].map(lambda v: f"{v:.4f}"),
            "failures": df["failures"],
        },
        columns=REPORT_COLUMNS,
    )


def emit_report(report: SimReport, path: str | Path) -> Path:
    path = Path(path)
    report_frame(report).to_csv(path, index=False)
    logger.info(f"Wrote {len(report.rows)} rows to {path}")
    return path


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

_LIST_KEYS: dict[str, tuple[str, type]] = {
    "models": ("models", int),
    "sizes": ("sample_sizes", int),
    "alphas": ("alphas", float),
    "a_values": ("a_values", float),
    "methods": ("methods", str),
}
_SCALAR_KEYS: dict[str, tuple[str, type]] = {
    "reps": ("replications", int),
    "seed": ("base_seed", int),
    "tau": ("nominal_tau", float),
    "errors": ("F", str),
    "F": ("F", str),
}
_EG_KEYS: dict[str, tuple[str, type]] = {
    "k": ("k", float),
    "c": ("c", float),
    "m": ("m_override", int),
    "h": ("h_override", float),
    "a1": ("a1", float),
    "a2": ("a2", float),
    "level_mode": ("level_mode", str),
    "kernel": ("kernel", str),
    "level_seed": ("seed", int),
}


def _config_key(field: str) -> str:
    for table in (_LIST_KEYS, _SCALAR_KEYS, _EG_KEYS):
        for key, (name, _) in table.items():
            if name == field:
                return key
    return field


def parse_sim_config(path: str | Path) -> SimConfig:
    """Read a flat ``key = value`` campaign file (lists are comma separated)."""
    top: dict[str, Any] = {}
    eg: dict[str, Any] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key in _LIST_KEYS:
                field, cast = _LIST_KEYS[key]
                top[field] = [cast(v.strip()) for v in value.split(",") if v.strip()]
            elif key in _SCALAR_KEYS:
                field, cast = _SCALAR_KEYS[key]
                top[field] = cast(value)
            elif key in _EG_KEYS:
                field, cast = _EG_KEYS[key]
                eg[field] = cast(value)
            else:
                raise ConfigError("unknown key", key=key)
        except ValueError as e:
            raise ConfigError(f"cannot parse {value!r}: {e}", key=key) from e

    try:
        return SimConfig(**top, eg_config=EGConfig(**eg))
    except ValidationError as e:
        error = e.errors()[0]
        loc = [part for part in error["loc"] if isinstance(part, str)]
        field = loc[-1] if loc else "config"
        raise ConfigError(error["msg"], key=_config_key(field)) from e


# ---------------------------------------------------------------------------
# Density accuracy study
# ---------------------------------------------------------------------------


def true_density_at_quantile(alpha: float, F: str = "normal") -> float:
    """f(F^-1(alpha)), the conditional density in a pure location null."""
    if F == "normal":
        return float(normal_pdf(normal_quantile(alpha)))
    t = student_t_quantile(alpha, 3.0)
    return float(2.0 / (math.pi * math.sqrt(3.0)) * (1.0 + t * t / 3.0) ** -2)


def _density_errors(
    spec: DGPSpec, rep: int, base_seed: int, cfg: EGConfig
) -> tuple[float, float, float] | None:
    rng = replication_rng(base_seed, spec, rep)
    alpha = spec.alpha_star
    m = cfg.m_override or grid_size_m(spec.n, cfg.k)
    h_m = cfg.h_override or bandwidth_h(m, cfg.c)
    levels = draw_levels(cfg, m)
    try:
        data, _ = generate_sample(spec, rng)
        process = fit_process(data, levels)
        fit = fit_rq(data, alpha)
    except QRWaldError as e:
        logger.debug(f"density replication {rep} failed: {e}")
        return None
    feasible = eg_density(
        data, process, fit, h_m, a1=cfg.a1, a2=cfg.a2, kernel=cfg.kernel
    )
    oracle = infeasible_density(
        data,
        true_beta(spec),
        alpha,
        process.levels,
        h_m,
        a1=cfg.a1,
        a2=cfg.a2,
        kernel=cfg.kernel,
    )
    target = true_density_at_quantile(alpha, spec.F)
    return (
        float(np.mean(np.abs(feasible - target))),
        float(np.mean(np.abs(oracle - target))),
        float(np.mean(np.abs(feasible - oracle))),
    )


def density_study(
    sample_sizes: list[int],
    alphas: list[float],
    *,
    model: int = 1,
    replications: int = 50,
    base_seed: int = 0,
    F: str = "normal",
    cfg: EGConfig | None = None,
    n_jobs: int | None = None,
) -> pd.DataFrame:
    """Mean absolute density errors of the EG and infeasible estimators.

    Only pure-location nulls (Models 1, 2, 4, 5 at a = 0) have the constant
    target density f(F^-1(alpha)).
    """
    if model not in (1, 2, 4, 5):
        raise ConfigError("density study needs a pure-location null", key="model")
    cfg = cfg or EGConfig()
    n_jobs = n_jobs or config.thread_count()
    records = []
    for n in sample_sizes:
        for alpha in alphas:
            spec = DGPSpec(model=model, a=0.0, alpha_star=alpha, F=F, n=n)
            errors = Parallel(n_jobs=n_jobs)(
                delayed(_density_errors)(spec, rep, base_seed, cfg)
                for rep in range(replications)
            )
            ok = np.array([e for e in errors if e is not None], dtype=float)
            if ok.size == 0:
                logger.warning(f"density study n={n} alpha={alpha}: every replication failed")
                ok = np.full((1, 3), math.nan)
            records.append(
                {
                    "n": n,
                    "alpha": alpha,
                    "eg_mae": float(ok[:, 0].mean()),
                    "infeasible_mae": float(ok[:, 1].mean()),
                    "feasible_gap": float(ok[:, 2].mean()),
                    "replications": int(len(errors)),
                    "failures": int(sum(e is None for e in errors)),
                }
            )
    return pd.DataFrame.from_records(records)
