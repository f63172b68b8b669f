"""Run the full pipeline on a bundled case and write the output bundle.

    python scripts/run_case.py [case14|case14_stressed] [--out-dir DIR] [--jobs N]
"""

from __future__ import annotations

import argparse
import sys

from cedispatch import cli
from cedispatch.model import bundled


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("case", nargs="?", default="case14")
    ap.add_argument("--out-dir", default=None)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    out = args.out_dir or f"out/{args.case}"
    return cli.main(["run", "--config", str(bundled(args.case)), "--out-dir", out,
                     "--jobs", str(args.jobs)])


if __name__ == "__main__":
    sys.exit(main())
