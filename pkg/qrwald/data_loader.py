"""Dataset ingestion, restriction building and dataset export."""

import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    DuplicateColumn,
    ParseError,
    RestrictionError,
    UnknownColumn,
)
from .schemas import Dataset, Restriction

logger = logging.getLogger(__name__)

INTERCEPT = "intercept"
RHS = "rhs"

# Reemployment-bonus data (one treatment group plus controls, whitespace separated)
PENN_URL = "http://www.econ.uiuc.edu/~roger/research/inference/Penn46.ascii"
PENN_RESPONSE = "inuidur1"
PENN_CONTROLS = [
    "female",
    "black",
    "othrace",
    "dep",
    "q2",
    "q3",
    "q4",
    "q5",
    "recall",
    "agelt35",
    "agegt54",
    "durable",
    "lusd",
    "husd",
]
PENN_GENDER_INTERACTIONS = ["black", "hispanic", "othrace", "dep"]

_LINE_RE = re.compile(r"line (\d+)")


def _delimiter(header: str) -> str:
    return "," if "," in header else r"\s+"


def _header_names(header: str, sep: str) -> list[str]:
    if sep == ",":
        return [name.strip() for name in header.split(",")]
    return header.split()


def read_table(path: str | Path) -> pd.DataFrame:
    """Read a headed comma or whitespace separated file."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
    if not header:
        raise ParseError("file is empty or has no header", line=1)
    sep = _delimiter(header)
    names = _header_names(header, sep)
    seen: set[str] = set()
    for name in names:
        if name in seen:
            raise DuplicateColumn(f"duplicate column name {name!r} in {path.name}")
        seen.add(name)

    try:
        df = pd.read_csv(
            path,
            sep=sep,
            float_precision="round_trip",
            skipinitialspace=True,
            on_bad_lines="error",
        )
    except pd.errors.ParserError as e:
        match = _LINE_RE.search(str(e))
        raise ParseError(str(e), line=int(match.group(1)) if match else None) from e
    except pd.errors.EmptyDataError as e:
        raise ParseError("no data rows", line=2) from e
    df.columns = [str(c).strip() for c in df.columns]
    return df


def _numeric(df: pd.DataFrame, source: str) -> tuple[pd.DataFrame, int]:
    numeric = df.apply(lambda col: pd.to_numeric(col, errors="coerce"))
    bad = numeric.isna().any(axis=1) | ~np.isfinite(numeric.to_numpy(dtype=float)).all(axis=1)
    dropped = int(bad.sum())
    if dropped:
        logger.warning(f"Dropped {dropped} rows with missing or non-numeric cells from {source}")
    return numeric.loc[~bad].reset_index(drop=True), dropped


def load_csv(path: str | Path, response: str, *, intercept: bool = False) -> Dataset:
    """Dataset with ``response`` as y and every other column as a regressor."""
    df = read_table(path)
    if response not in df.columns:
        raise UnknownColumn(f"response column {response!r} not in {list(df.columns)}")
    numeric, dropped = _numeric(df, Path(path).name)
    if numeric.empty:
        raise DataError(f"no usable rows in {path}")

    regressors = [c for c in numeric.columns if c != response]
    X = numeric[regressors].to_numpy(dtype=float)
    if intercept:
        if INTERCEPT in regressors:
            raise DuplicateColumn(f"{INTERCEPT!r} already present; drop --intercept")
        X = np.column_stack([np.ones(len(numeric)), X])
        regressors = [INTERCEPT, *regressors]

    logger.info(f"Loaded {len(numeric)} rows, {len(regressors)} regressors from {path}")
    return Dataset(
        y=numeric[response].to_numpy(dtype=float),
        X=X,
        column_names=regressors,
        response_name=response,
        dropped_rows=dropped,
    )


def build_restriction(data: Dataset, names: list[str]) -> Restriction:
    """H0: the named coefficients are jointly zero."""
    if not names:
        raise RestrictionError("at least one column name is required")
    if len(set(names)) != len(names):
        raise RestrictionError(f"repeated column in {names}")
    R = np.zeros((len(names), data.d))
    for row, name in enumerate(names):
        if name not in data.column_names:
            raise UnknownColumn(f"{name!r} is not a regressor; have {data.column_names}")
        R[row, data.column_index(name)] = 1.0
    return Restriction(R=R, r=np.zeros(len(names)), labels=list(names))


def load_restriction_file(path: str | Path, data: Dataset) -> Restriction:
    """Explicit R, r: one row per restriction, coefficients by column name.

    Columns not mentioned get coefficient 0; a missing ``rhs`` column means r = 0.
    """
    df = read_table(path)
    unknown = [c for c in df.columns if c != RHS and c not in data.column_names]
    if unknown:
        raise UnknownColumn(f"restriction file names unknown columns {unknown}")
    numeric = df.apply(lambda col: pd.to_numeric(col, errors="coerce"))
    if numeric.isna().any().any():
        raise ParseError("restriction file has missing or non-numeric cells")

    R = np.zeros((len(numeric), data.d))
    for name in numeric.columns:
        if name != RHS:
            R[:, data.column_index(name)] = numeric[name].to_numpy(dtype=float)
    r = numeric[RHS].to_numpy(dtype=float) if RHS in numeric.columns else np.zeros(len(numeric))
    return Restriction(R=R, r=r)


def write_dataset_csv(data: Dataset, path: str | Path) -> Path:
    path = Path(path)
    df = pd.DataFrame(data.X, columns=data.column_names)
    df.insert(0, data.response_name, data.y)
    df.to_csv(path, index=False, float_format="%.17g")
    return path


def load_penn(path: str | Path) -> tuple[Dataset, Restriction]:
    """Reemployment-bonus design and the treatment-homogeneity restriction.

    y = log(inuidur1); regressors are an intercept, the treatment indicator
    (tg != 0), the controls, treatment x control and female x
    {black, hispanic, othrace, dep}. H0 sets every treatment interaction to 0.
    """
    df = read_table(path)
    needed = {"tg", PENN_RESPONSE, *PENN_CONTROLS, "female", *PENN_GENDER_INTERACTIONS}
    missing = sorted(needed - set(df.columns))
    if missing:
        raise UnknownColumn(f"penn profile needs columns {missing}")
    numeric, dropped = _numeric(df[sorted(needed)], Path(path).name)
    groups = sorted(set(numeric["tg"].unique()) - {0.0})
    if len(groups) > 1:
        logger.warning(f"Pooling treatment groups {groups} into one indicator")

    treat = (numeric["tg"] != 0).astype(float)
    design = {INTERCEPT: np.ones(len(numeric)), "treat": treat.to_numpy()}
    for name in PENN_CONTROLS:
        design[name] = numeric[name].to_numpy(dtype=float)
    for name in PENN_GENDER_INTERACTIONS:
        design[f"female_x_{name}"] = (numeric["female"] * numeric[name]).to_numpy(dtype=float)
    interactions = []
    for name in PENN_CONTROLS:
        column = f"treat_x_{name}"
        design[column] = (treat * numeric[name]).to_numpy(dtype=float)
        interactions.append(column)

    durations = numeric[PENN_RESPONSE].to_numpy(dtype=float)
    if np.any(durations <= 0.0):
        raise DataError("inuidur1 must be positive to take logs")
    data = Dataset(
        y=np.log(durations),
        X=np.column_stack(list(design.values())),
        column_names=list(design),
        response_name=f"log_{PENN_RESPONSE}",
        dropped_rows=dropped,
    )
    logger.info(f"Penn profile: n={data.n}, d={data.d}, {len(interactions)} tested interactions")
    return data, build_restriction(data, interactions)
