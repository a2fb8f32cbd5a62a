"""Command-line entry point: ``figures curves <spec.json>``, ``figures boxes``."""

import argparse
import sys

from .boxes import plot_estimate_boxes
from .curves import CurvePlotSpec, SchemaError, plot_fitness_curves

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_SCHEMA = 2


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="figures",
        description="Render figures from comic-lab CSV/JSON artifacts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_curves = sub.add_parser("curves", help="fitness-vs-n curve panels")
    p_curves.add_argument("spec", help="CurvePlotSpec JSON file")

    p_boxes = sub.add_parser("boxes", help="estimate box plots")
    p_boxes.add_argument("records", nargs="+", help="run record JSON files")
    p_boxes.add_argument("--out", default="estimates",
                         help="output image path (stem; .svg and .png written)")

    args = parser.parse_args(argv)
    try:
        if args.command == "curves":
            svg, png = plot_fitness_curves(CurvePlotSpec.from_json(args.spec))
        else:
            svg, png = plot_estimate_boxes(args.records, args.out)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(svg)
    print(png)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
