from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import config
from .errors import DataError, DuplicateColumn, RankDeficient, RestrictionError

GMethod = Literal["EG", "Powell", "HK", "IIDSparsity", "Oracle"]
MethodName = Literal["weg", "wiid", "wnid", "wker", "oracle"]
CellStatus = Literal["ok", "all_failed", "null_failed"]


class ArrayModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def _float_array(value: Any, ndim: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if ndim == 1 and arr.ndim == 0:
        arr = arr.reshape(1)
    return arr


# --- Data ----


class Dataset(ArrayModel):
    y: np.ndarray
    X: np.ndarray
    column_names: list[str]
    response_name: str = "y"
    dropped_rows: int = 0
    """Rows discarded at load time because of missing or non-numeric cells."""

    @field_validator("y", mode="before")
    @classmethod
    def _vector(cls, value):
        return _float_array(value, 1)

    @field_validator("X", mode="before")
    @classmethod
    def _matrix(cls, value):
        return _float_array(value, 2)

    @model_validator(mode="after")
    def _check(self):
        n, d = self.X.shape
        if self.y.ndim != 1 or self.y.shape[0] != n:
            raise DataError(f"y has shape {self.y.shape}, X has {n} rows")
        if len(self.column_names) != d:
            raise DataError(f"{len(self.column_names)} column names for {d} columns")
        seen: set[str] = set()
        for name in self.column_names:
            if name in seen:
                raise DuplicateColumn(f"duplicate column name {name!r}")
            seen.add(name)
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise DataError("dataset has non-finite entries")
        if not n > d >= 1:
            raise DataError(f"need n > d >= 1, got n={n}, d={d}")
        rank = np.linalg.matrix_rank(self.X)
        if rank < d:
            raise RankDeficient(f"design has rank {rank} < {d} columns")
        return self

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def column_index(self, name: str) -> int:
        return self.column_names.index(name)


# --- Quantile regression ----


class QuantileFit(ArrayModel):
    alpha: float
    beta: np.ndarray
    residuals: np.ndarray
    objective: float = Field(ge=0.0)
    iterations: int
    converged: bool
    vertex: bool = False
    """True when the solution was polished to an exact-fit basis."""


class QuantileProcess(ArrayModel):
    levels: np.ndarray
    fits: list[QuantileFit]

    @model_validator(mode="after")
    def _aligned(self):
        if len(self.fits) != len(self.levels):
            raise DataError(f"{len(self.fits)} fits for {len(self.levels)} levels")
        return self

    @property
    def betas(self) -> np.ndarray:
        """m x d matrix, one row per level."""
        return np.vstack([fit.beta for fit in self.fits])


# --- Density / G estimation ----


class EGConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    a1: float = config.A1
    a2: float = config.A2
    k: float = Field(default=config.K, gt=0.0)
    c: float = Field(default=config.C, gt=0.0)
    m_override: int | None = Field(default=None, ge=2)
    h_override: float | None = Field(default=None, gt=0.0)
    level_mode: Literal["equispaced", "iid-uniform"] = "equispaced"
    kernel: Literal["epanechnikov", "epanechnikov-half"] = config.KERNEL
    seed: int = 0

    @model_validator(mode="after")
    def _interval(self):
        if not 0.0 < self.a1 < self.a2 < 1.0:
            raise ValueError(f"need 0 < a1 < a2 < 1, got a1={self.a1}, a2={self.a2}")
        return self


class GEstimate(ArrayModel):
    alpha: float
    method: GMethod
    G: np.ndarray
    f_hat: np.ndarray
    bandwidth: float
    m_used: int | None = None
    diagnostics: dict[str, Any] = Field(default_factory=dict)


class HMatrix(ArrayModel):
    H: np.ndarray


# --- Inference ----


class Restriction(ArrayModel):
    R: np.ndarray
    r: np.ndarray
    labels: list[str] | None = None

    @field_validator("R", mode="before")
    @classmethod
    def _matrix(cls, value):
        arr = np.asarray(value, dtype=float)
        return arr.reshape(1, -1) if arr.ndim == 1 else arr

    @field_validator("r", mode="before")
    @classmethod
    def _vector(cls, value):
        return _float_array(value, 1)

    @model_validator(mode="after")
    def _rank(self):
        if self.R.ndim != 2 or self.R.shape[0] == 0:
            raise RestrictionError("R must be a non-empty J x d matrix")
        J, d = self.R.shape
        if self.r.shape != (J,):
            raise RestrictionError(f"r has shape {self.r.shape}, expected ({J},)")
        if J > d:
            raise RestrictionError(f"J={J} restrictions exceed d={d} coefficients")
        if np.linalg.matrix_rank(self.R) < J:
            raise RestrictionError("R does not have full row rank")
        if self.labels is not None and len(self.labels) != J:
            raise RestrictionError(f"{len(self.labels)} labels for {J} restrictions")
        return self

    @property
    def J(self) -> int:
        return self.R.shape[0]


class WaldResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    statistic: float | None
    J: int
    p_value: float | None
    reject_at: dict[float, bool] = Field(default_factory=dict)
    method: str
    status: str = "ok"
    diagnostics: dict[str, Any] = Field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


# --- Simulation ----


class DGPSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: int = Field(ge=1, le=6)
    a: float = 0.0
    alpha_star: float = Field(default=0.5, gt=0.0, lt=1.0)
    F: Literal["normal", "t3"] = "normal"
    n: int = Field(ge=20)


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    models: list[int] = Field(default_factory=lambda: [1])
    sample_sizes: list[int] = Field(default_factory=lambda: [100, 300])
    alphas: list[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75])
    a_values: list[float] = Field(default_factory=lambda: [0.0, 0.5, 1.0, 1.5])
    methods: list[MethodName] = Field(default_factory=lambda: ["weg"])
    replications: int = 1000
    nominal_tau: float = Field(default=config.NOMINAL_TAU, gt=0.0, le=1.0)
    base_seed: int = 0
    F: Literal["normal", "t3"] = "normal"
    eg_config: EGConfig = Field(default_factory=EGConfig)

    @field_validator("models")
    @classmethod
    def _models(cls, value: list[int]):
        bad = [m for m in value if m not in range(1, 7)]
        if bad or not value:
            raise ValueError(f"models must be a non-empty subset of 1..6, got {value}")
        return sorted(set(value))

    @field_validator("sample_sizes")
    @classmethod
    def _sizes(cls, value: list[int]):
        if not value or min(value) < 20:
            raise ValueError(f"sample sizes must be >= 20, got {value}")
        return sorted(set(value))

    @field_validator("alphas")
    @classmethod
    def _alphas(cls, value: list[float]):
        if not value or any(not 0.0 < a < 1.0 for a in value):
            raise ValueError(f"alphas must lie in (0, 1), got {value}")
        return sorted(set(value))

    @field_validator("a_values")
    @classmethod
    def _a_values(cls, value: list[float]):
        if 0.0 not in value:
            raise ValueError("a_values must include 0 (needed for size correction)")
        return sorted(set(value))

    @field_validator("methods")
    @classmethod
    def _methods(cls, value: list[str]):
        if not value:
            raise ValueError("at least one method is required")
        return list(dict.fromkeys(value))

    @field_validator("replications")
    @classmethod
    def _replications(cls, value: int):
        if value < 100:
            raise ValueError(f"replications must be >= 100, got {value}")
        return value


class SimRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: int
    n: int
    alpha: float
    a: float
    method: str
    # None when no replication in the cell (or its a = 0 null cell) produced a statistic
    raw_rejection_pct: float | None = Field(ge=0.0, le=100.0)
    size_corrected_rejection_pct: float | None = Field(ge=0.0, le=100.0)
    replications: int
    cpu_seconds_mean: float
    failures: int
    status: CellStatus = "ok"


class SimReport(BaseModel):
    rows: list[SimRow] = Field(default_factory=list)
    base_seed: int = 0
    nominal_tau: float = config.NOMINAL_TAU


# --- Command line ----


class RunSpec(BaseModel):
    """One CLI invocation, validated before any data is read."""

    model_config = ConfigDict(frozen=True)

    command: Literal["fit", "test", "curve", "simulate", "sample"]
    input_path: str | None = None
    output_path: str | None = None
    response: str | None = None
    intercept: bool = False
    profile: Literal["penn"] | None = None
    alpha: float | None = Field(default=None, gt=0.0, lt=1.0)
    grid: tuple[float, float, int] | None = None
    method: Literal["weg", "wiid", "wnid", "wker"] = "weg"
    restrict: list[str] = Field(default_factory=list)
    restrict_file: str | None = None
    eg_config: EGConfig = Field(default_factory=EGConfig)
    nominal_tau: float = Field(default=config.NOMINAL_TAU, gt=0.0, le=1.0)
    svg: bool = False

    @model_validator(mode="after")
    def _consistent(self):
        data_commands = ("fit", "test", "curve")
        if self.command in data_commands:
            if not self.input_path:
                raise ValueError(f"{self.command} needs --input")
            if self.profile is None and not self.response:
                raise ValueError(f"{self.command} needs --response (or --profile)")
        if self.command in ("fit", "test") and self.alpha is None:
            raise ValueError(f"{self.command} needs --alpha")
        if self.command == "curve":
            if self.grid is None:
                raise ValueError("curve needs --grid LO:HI:COUNT")
            lo, hi, count = self.grid
            if count < 1 or not 0.0 < lo <= hi < 1.0:
                raise ValueError(f"bad grid {lo}:{hi}:{count}")
            if count > 1 and lo == hi:
                raise ValueError("grid with several points needs LO < HI")
            if not self.output_path:
                raise ValueError("curve needs --out")
        if self.command in ("test", "curve"):
            if self.profile is None and not (self.restrict or self.restrict_file):
                raise ValueError(f"{self.command} needs --restrict or --restrict-file")
        if self.command in ("simulate", "sample") and not self.output_path:
            raise ValueError(f"{self.command} needs --out")
        if self.command == "simulate" and not self.input_path:
            raise ValueError("simulate needs --config")
        return self

    def levels(self) -> np.ndarray:
        lo, hi, count = self.grid
        return np.linspace(lo, hi, count)
