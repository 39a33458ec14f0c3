"""SVG rendering of a p-value curve over quantile levels."""

import logging
from pathlib import Path

from jinja2 import Environment, PackageLoader

from .errors import EmptyGrid
from .schemas import WaldResult

logger = logging.getLogger(__name__)

WIDTH = 800
HEIGHT = 500
MARGIN = {"left": 60, "right": 20, "top": 20, "bottom": 50}
REFERENCE_LEVEL = 0.10

_env = Environment(
    loader=PackageLoader("qrwald", "templates"),
    autoescape=True,
    trim_blocks=True,
    lstrip_blocks=True,
)


def _segments(points: list[tuple[float, float] | None]) -> list[str]:
    """Polyline point strings; failed levels break the curve."""
    segments, current = [], []
    for point in points:
        if point is None:
            if current:
                segments.append(" ".join(current))
            current = []
            continue
        current.append(f"{point[0]:.2f},{point[1]:.2f}")
    if current:
        segments.append(" ".join(current))
    return segments


def render_pvalue_svg(
    results: list[WaldResult],
    *,
    reference: float = REFERENCE_LEVEL,
    title: str = "p-values of pointwise Wald tests",
) -> str:
    if not results:
        raise EmptyGrid("nothing to plot")
    left = MARGIN["left"]
    right = WIDTH - MARGIN["right"]
    top = MARGIN["top"]
    bottom = HEIGHT - MARGIN["bottom"]

    lo = min(r.alpha for r in results)
    hi = max(r.alpha for r in results)
    span = hi - lo if hi > lo else 1.0

    def x_pos(alpha: float) -> float:
        return left + (alpha - lo) / span * (right - left)

    def y_pos(p: float) -> float:
        return bottom - p * (bottom - top)

    points = [
        (x_pos(r.alpha), y_pos(r.p_value)) if r.p_value is not None else None
        for r in results
    ]
    x_ticks = [
        {"pos": x_pos(lo + i * span / 4), "label": f"{lo + i * span / 4:.2f}"} for i in range(5)
    ]
    y_ticks = [{"pos": y_pos(i / 5), "label": f"{i / 5:.1f}"} for i in range(6)]

    return _env.get_template("pvalue_curve.svg.j2").render(
        width=WIDTH,
        height=HEIGHT,
        left=left,
        right=right,
        top=top,
        bottom=bottom,
        title=title,
        x_ticks=x_ticks,
        y_ticks=y_ticks,
        reference_y=y_pos(reference),
        segments=_segments(points),
    )


def write_pvalue_svg(results: list[WaldResult], path: str | Path, **kwargs) -> Path:
    path = Path(path)
    path.write_text(render_pvalue_svg(results, **kwargs))
    logger.info(f"Wrote p-value curve to {path}")
    return path
