"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 BiRank did not
converge (only with ``--strict``).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from fraudnet import __version__
from fraudnet.errors import ConfigError, DataError
from fraudnet.pipeline import (
    STAGES,
    PipelineConfig,
    Run,
    run_pipeline,
    stage_featurize,
)

logger = logging.getLogger("fraudnet")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NONCONVERGED = 0, 2, 3, 4


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--seed", type=int, help="master random seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads for cross-validation")
    p.add_argument("--strict", action="store_true", help="exit 4 if BiRank does not converge")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def _inputs(p: argparse.ArgumentParser, edges=True, labels=True, intrinsic=False) -> None:
    if edges:
        p.add_argument("--edges", help="edge CSV (claim_id,party_id,party_kind,weight[,is_company])")
    if labels:
        p.add_argument("--labels", help="label CSV (claim_id,filing_date,fraud)")
        p.add_argument("--cutoff", help="last date of the historic period (YYYY-MM-DD)")
    if intrinsic:
        p.add_argument("--intrinsic", help="intrinsic feature CSV")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="fraudnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic dataset")
    p = sub.add_parser("build", parents=[common], help="read an edge list into a graph snapshot")
    _inputs(p, labels=False)
    p = sub.add_parser("birank", parents=[common], help="score claims and parties")
    _inputs(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--max-iterations", type=int)
    p = sub.add_parser("featurize", parents=[common], help="score and neighborhood features")
    _inputs(p)
    p.add_argument("--targets", type=Path,
                   help="file with one claim id per line (default: claims filed after the cutoff)")
    p = sub.add_parser("motifs", parents=[common], help="list 4- and 6-cycles and label mixes")
    _inputs(p)
    p.add_argument("--max-degree", type=int, dest="motif_max_degree")
    p = sub.add_parser("make-datasets", parents=[common], help="assemble the two modelling datasets")
    _inputs(p, intrinsic=True)
    p.add_argument("--sample-size", type=int)
    p = sub.add_parser("experiment", parents=[common], help="importance, CV curves and final models")
    p = sub.add_parser("pipeline", parents=[common], help="run every stage")
    _inputs(p, intrinsic=True)
    p.add_argument("--skip-motifs", action="store_true")
    return parser


_OVERRIDES = ("seed", "out", "threads", "edges", "labels", "intrinsic", "cutoff", "alpha",
              "tolerance", "max_iterations", "motif_max_degree", "sample_size")


def load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    values = cfg.to_dict()
    for name in _OVERRIDES:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = str(Path(v).resolve()) if name in ("edges", "labels", "intrinsic") else v
    return PipelineConfig(**values)


def _read_targets(path: Path) -> list:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    return [s.strip() for s in lines if s.strip() and s.strip() != "claim_id"]


def _converged(run: Run) -> bool:
    b = run.stages.get("birank")
    return b is None or b["converged"]


def execute(args) -> int:
    cfg = load_config(args)
    if args.command == "pipeline":
        run = run_pipeline(cfg, motifs=not args.skip_motifs)
    else:
        run = Run(cfg)
        if args.command == "featurize" and args.targets is not None:
            targets = _read_targets(args.targets)
            run.stage("featurize", lambda r: stage_featurize(r, targets))
        else:
            run.stage(args.command, STAGES[args.command])
        run.write_manifest(f"manifest_{args.command.replace('-', '_')}.json")
    logger.info("wrote %s", run.root)
    if args.strict and not _converged(run):
        logger.error("BiRank did not converge")
        return EXIT_NONCONVERGED
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return execute(args)
    except ConfigError as exc:
        print(f"fraudnet: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"fraudnet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
