"""Download the reemployment-bonus experiment data used by ``--profile penn``.

Usage:
    uv run python -m scripts.fetch_penn
    uv run python -m scripts.fetch_penn --out data/Penn46.ascii
"""

import argparse
import logging
from pathlib import Path

import requests

from qrwald.data_loader import PENN_URL, load_penn

logger = logging.getLogger(__name__)

DEFAULT_OUT = Path(__file__).parent.parent / "data" / "Penn46.ascii"


def fetch(url: str, out_path: Path) -> Path:
    response = requests.get(url, timeout=30)
    response.raise_for_status()
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(response.content)
    return out_path


def main():
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    parser = argparse.ArgumentParser(description="Fetch the Penn reemployment-bonus data")
    parser.add_argument("--url", default=PENN_URL)
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = parser.parse_args()

    path = fetch(args.url, args.out)
    data, restr = load_penn(path)
    logger.info(
        f"Saved {path}: n={data.n}, {data.d} regressors, {restr.J} tested interactions"
    )


if __name__ == "__main__":
    main()
