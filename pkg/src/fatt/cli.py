"""Command line: ``fatt build|query|code|tolerate|stats|bench``.

Exit status is 0 on success, 1 on usage errors and 2 on data or
corruption errors. Timing goes to stderr so stdout is reproducible.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .coding import CodingConfig, IndexCode, encode_image
from .errors import FattError
from .harness import bench_scaling, build_index, flatness, ingest_dataset, scaling_csv
from .imaging import load_raster
from .store import load_index, save_index
from .tree import FattConfig

log = logging.getLogger("fatt")

USAGE_ERROR = 1
DATA_ERROR = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _sizes(text: str):
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return sorted(sizes)


def _add_shape(p, side_default=256):
    p.add_argument("--branching", type=int, default=16)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--side", type=int, default=side_default)
    p.add_argument("--levels", type=int, default=4)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fatt", description="Wavelet-coded image index with tolerance search.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build", help="index a directory of images")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--radius", type=int, default=1, help="default tolerance stored in the index")
    _add_shape(p)

    p = sub.add_parser("query", help="query an index by example image")
    p.add_argument("--index", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--radius", type=int, default=None)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("code", help="print the index code of an image")
    p.add_argument("--image", required=True)
    _add_shape(p)

    p = sub.add_parser("tolerate", help="tolerance search for a rendered code")
    p.add_argument("--index", required=True)
    p.add_argument("--code", required=True)
    p.add_argument("--radius", type=int, default=None)

    p = sub.add_parser("stats", help="summarize an index")
    p.add_argument("--index", required=True)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("bench", help="scaling benchmark over synthetic data")
    p.add_argument("--sizes", type=_sizes, default=[100, 500, 1000])
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--timings", action="store_true", help="write wall-clock build_ms into the CSV")
    _add_shape(p, side_default=128)
    return parser


def _shape_configs(args):
    fatt_cfg = FattConfig(args.branching, args.depth, getattr(args, "radius", 1))
    coding = CodingConfig.for_tree(args.branching, args.depth, args.levels, args.k)
    return fatt_cfg, coding


def _cmd_build(args, out):
    fatt_cfg, coding = _shape_configs(args)
    dataset = ingest_dataset(args.input, args.side)
    tree, report = build_index(dataset, fatt_cfg, coding)
    nbytes = save_index(tree, coding, args.out, args.side)
    log.info("built %d entries in %.1f ms", report.entries, report.build_ms)
    print(f"entries {report.entries}", file=out)
    print(f"occupied_leaves {report.stats['occupied_leaves']}", file=out)
    print(f"bytes {nbytes}", file=out)


def _cmd_query(args, out):
    tree, coding, side = load_index(args.index)
    code, feats = encode_image(load_raster(args.image, side), coding)
    ranked, stats = tree.retrieve(feats, code, args.top_k, args.radius)
    for rank, (rid, dist) in enumerate(ranked, start=1):
        if args.json:
            print(json.dumps({"rank": rank, "id": rid, "distance": dist}), file=out)
        else:
            print(f"{rank}\t{rid}\t{dist:.6f}", file=out)
    log.info("code %s, %d nodes visited, %d distances", code.rendered,
             stats.nodes_visited, stats.distance_computations)


def _cmd_code(args, out):
    _, coding = _shape_configs(args)
    code, _ = encode_image(load_raster(args.image, args.side), coding)
    print(code.rendered, file=out)


def _cmd_tolerate(args, out):
    tree, _, _ = load_index(args.index)
    code = IndexCode.parse(args.code, tree.branching)
    leaves, stats = tree.tolerant_search(code, args.radius)
    for leaf in leaves:
        for e in leaf.entries:
            print(f"{IndexCode(e.code, tree.branching).rendered}\t{leaf.address}\t{e.id}", file=out)
    log.info("%d nodes visited, %d leaves probed", stats.nodes_visited, stats.leaves_probed)


def _cmd_stats(args, out):
    tree, coding, side = load_index(args.index)
    report = dict(tree.stats(), branching=tree.branching, depth=tree.depth, k=coding.k,
                  levels=coding.levels, side=side)
    if args.json:
        print(json.dumps(report, sort_keys=True), file=out)
        return
    for key, value in report.items():
        print(f"{key} {value}", file=out)


def _cmd_bench(args, out):
    fatt_cfg, coding = _shape_configs(args)
    rows = bench_scaling(args.sizes, fatt_cfg, coding, args.seed, args.side, args.queries)
    text = scaling_csv(rows, timings=args.timings)
    for r in rows:
        log.info("n=%d build %.1f ms", r.n, r.build_ms)
    ratio = sum(r.mean_dist_comp for r in rows) / sum(r.mean_linear_comp for r in rows)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        print(f"dist_comp_ratio {ratio!r}", file=out)
        print(f"node_visit_spread {flatness(rows)!r}", file=out)
    else:
        out.write(text)


COMMANDS = {
    "build": _cmd_build,
    "query": _cmd_query,
    "code": _cmd_code,
    "tolerate": _cmd_tolerate,
    "stats": _cmd_stats,
    "bench": _cmd_bench,
}


def _configure_logging():
    level = os.environ.get("FATT_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    _configure_logging()
    try:
        args = make_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return USAGE_ERROR
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else USAGE_ERROR
    try:
        COMMANDS[args.command](args, out)
    except (FattError, ValueError, KeyError, OSError) as exc:
        print(f"fatt {args.command}: {exc}", file=sys.stderr)
        return DATA_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
