#!/usr/bin/env python3
"""Rebuild the bundled offline fixture cache.

Runs the full pipeline against the deterministic synthetic transport with
the bundled demo configuration, so the committed cache contains exactly
the pages an offline run requests. Outputs of the warm-up run are thrown
away; only the cache is kept.
"""

from __future__ import annotations

import argparse
import shutil
import sys
import tempfile
from pathlib import Path

from collabkit.cli import AnalysisConfig, resolve_periods, run
from collabkit.ingest import PageCache
from collabkit.synthetic import ROOTS, SyntheticOpenAlexTransport

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CACHE = REPO_ROOT / "tests" / "fixtures" / "cache"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--cache-dir", default=str(DEFAULT_CACHE), help="cache directory to populate"
    )
    args = parser.parse_args()
    cache_dir = Path(args.cache_dir)
    if cache_dir.exists():
        shutil.rmtree(cache_dir)

    transport = SyntheticOpenAlexTransport()
    with tempfile.TemporaryDirectory() as scratch:
        config = AnalysisConfig(
            disciplines=ROOTS,
            periods=resolve_periods("paper-4"),
            top_n=10,
            min_volume=5,
            cache_dir=str(cache_dir),
            out_dir=str(Path(scratch) / "out"),
        )
        run(config, mode="online", stage="all", transport=transport, sleep=lambda s: None)

    pages = PageCache(cache_dir).fingerprints()
    print(f"cached {len(pages)} pages ({transport.calls} transport calls) in {cache_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
