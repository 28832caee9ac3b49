"""``wkam <kind> --config <path> [--out <dir>]``.

Exit status: 0 when every verdict passes, 2 when some verdict fails,
1 on errors (bad config, solver failure, refused selection).
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import KINDS, ExperimentConfig
from .runners import run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wkam", description="Vanishing-discount experiments on the circle.")
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--config", required=True, help="JSON experiment configuration")
    ap.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ExperimentConfig.from_json(args.config, kind=args.kind)
        report = run(cfg)
        out = args.out or cfg.output_dir
        if out is not None:
            path = report.write(out)
            print(f"wrote {path}")
    except Exception as exc:  # noqa: BLE001 -- every failure maps to exit code 1
        print(f"wkam {args.kind}: error: {exc}", file=sys.stderr)
        return 1
    for v in report.verdicts:
        tag = "info" if v.informational else ("PASS" if v.passed else "FAIL")
        print(f"[{tag}] {v.name}: {v.comparison}" + (f" ({v.detail})" if v.detail else ""))
    return 0 if report.passed else 2


if __name__ == "__main__":
    sys.exit(main())
