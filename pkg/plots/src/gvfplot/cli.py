"""Command line front end: gvfplot <kind> --in FILES --out IMAGE.

Exit codes: 0 success, 1 usage errors, 2 input files that do not match the
documented schemas.
"""

from __future__ import annotations

import argparse
import json
import sys

from .io import SchemaError
from .render import KINDS, PlotJob, render

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="gvfplot", description=__doc__)
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument(
        "--in", dest="inputs", nargs="+", required=True,
        help="input CSV/JSON files produced by the gvf tool",
    )
    parser.add_argument("--out", required=True, help="output image path (.png/.svg/...)")
    parser.add_argument("--stride", type=int, default=1, help="sample thinning factor")
    parser.add_argument(
        "--times", default=None,
        help="comma separated snapshot times (frames kind only)",
    )
    parser.add_argument("--title", default=None)
    parser.add_argument("--dpi", type=int, default=110)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    times: tuple[float, ...] = ()
    if args.times is not None:
        try:
            times = tuple(float(v) for v in args.times.split(","))
        except ValueError:
            print(f"gvfplot: error: cannot parse --times {args.times!r}", file=sys.stderr)
            return 1

    try:
        job = PlotJob(
            kind=args.kind,
            inputs=tuple(args.inputs),
            out=args.out,
            stride=args.stride,
            times=times,
            dpi=args.dpi,
            title=args.title,
        )
        summary = render(job)
    except (SchemaError, OSError) as exc:
        print(f"gvfplot: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
