import os
from typing import Final

from dotenv import load_dotenv

load_dotenv()

# Quantile-process grid: levels U_1..U_m live in [A1, A2].
A1 = 0.01
A2 = 0.99
K = 5.0  # grid-size constant
C = 1.5  # bandwidth constant
# "epanechnikov" has support [-1, 1]; "epanechnikov-half" is the same shape on [-1/2, 1/2]
KERNEL: Final = "epanechnikov"

NOMINAL_TAU = 0.05
REJECT_LEVELS = (0.01, 0.05, 0.10)

# The LP degenerates as alpha -> {0, 1} at small n.
LEVEL_FLOOR = 0.005
LEVEL_CEIL = 0.995

# Interior-point solver
SOLVER_MAX_ITER = 100
SOLVER_GAP_TOL = 1e-8
SOLVER_STEP = 0.99995

SINGULAR_RATIO = 1e-12

METHODS = {
    "weg": "EG",
    "wiid": "IIDSparsity",
    "wnid": "HK",
    "wker": "Powell",
}


def thread_count() -> int:
    """Worker count for joblib, from QRWALD_THREADS (default 1, -1 = all cores)."""
    raw = os.getenv("QRWALD_THREADS")
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        return 1
    return value if value != 0 else 1
