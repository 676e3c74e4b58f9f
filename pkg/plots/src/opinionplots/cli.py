"""Small command line mirroring the plot-job fields."""

from __future__ import annotations

import argparse
import sys

from .jobs import KINDS, EmptySelectionError, MissingColumnsError, PlotJob
from .render import render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opinionplots",
        description="Render trajectory, distance and scenario-panel figures "
                    "from opinion-game CSV exports.",
    )
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--csv", required=True, nargs="+",
                        help="input CSV file(s); stage files concatenate in order")
    parser.add_argument("--out", required=True, help="output image (.png or .svg)")
    parser.add_argument("--issues", default=None,
                        help="comma-separated issue numbers (default: all)")
    parser.add_argument("--agents", default=None,
                        help="comma-separated agent numbers (default: all)")
    parser.add_argument("--groups", default=None,
                        help="comma-separated group names (scenario panels)")
    parser.add_argument("--mark-extremum", type=float, default=None,
                        help="time at which to mark the distance extremum")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = PlotJob(
            inputs=list(args.csv),
            kind=args.kind,
            output=args.out,
            issues=[int(s) for s in args.issues.split(",")] if args.issues else None,
            agents=[int(s) for s in args.agents.split(",")] if args.agents else None,
            groups=args.groups.split(",") if args.groups else None,
            extremum_mark=args.mark_extremum,
        )
        result = render(job)
    except (OSError, ValueError, MissingColumnsError, EmptySelectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
