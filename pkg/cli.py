"""
Command-line harness.

    python cli.py generate --config experiments/vfl_acceptance.cfg --out data/
    python cli.py partition --input data/pooled.csv --mode hfl --parts 4 --out data/
    python cli.py run --config experiments/vfl_acceptance.cfg --transcript run.txt
    python cli.py report runs/report.txt
    python cli.py classify data/client-0.csv data/client-1.csv

Exit codes: 0 success, 2 configuration error, 3 protocol error, 4 safety refusal.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from constants import EXIT_OK, SCHEME_ALIASES
from datasets import (
    DatasetPartition,
    classify_partition,
    generate,
    partition_horizontal,
    partition_vertical,
    read_csv,
    write_csv,
)
from errors import ConfigError, FedBenchError, InvalidDatasetError
from experiment import (
    ExperimentConfig,
    apply_overrides,
    load_config,
    output_dir,
    parse_report,
    run_experiment,
    synthetic_spec,
)
from utils import configure_logging

logger = logging.getLogger(__name__)

MODULE = "harness"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedbench", description="Federated learning protocol workbench")
    parser.add_argument("--log-level", default=None, help="Diagnostics level (default FEDBENCH_LOG_LEVEL or INFO)")
    verbs = parser.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Experiment config file")
    common.add_argument("--seed", type=int, default=None, help="Run seed (overrides the config)")
    common.add_argument("--mode", choices=["hfl", "vfl"], default=None)
    common.add_argument("--scheme", choices=sorted(SCHEME_ALIASES), default=None)
    common.add_argument("--out", default=None, help="Output directory")

    verbs.add_parser("generate", parents=[common], help="Write a synthetic vertical dataset as a.csv and b.csv")

    partition = verbs.add_parser("partition", parents=[common], help="Split a pooled CSV horizontally or vertically")
    partition.add_argument("--input", required=True, help="Pooled CSV with an id column and a label column")
    partition.add_argument("--parts", type=int, default=None, help="Number of horizontal parts")
    partition.add_argument("--split", default=None, help="Comma-separated feature indices for party A")

    run = verbs.add_parser("run", parents=[common], help="Run an experiment and write its report")
    run.add_argument("--transcript", default=None, help="Where to write the message transcript")

    report = verbs.add_parser("report", help="Pretty-print a key=value report")
    report.add_argument("path")

    classify = verbs.add_parser("classify", help="Name the federation type of two or more CSV parts")
    classify.add_argument("paths", nargs="+")
    return parser


def _config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    return apply_overrides(config, seed=args.seed, mode=args.mode, scheme=args.scheme)


def _ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _read_input(path: str) -> DatasetPartition:
    try:
        return read_csv(path)
    except InvalidDatasetError as exc:
        raise ConfigError(MODULE, exc.message) from exc


def cmd_generate(args) -> int:
    config = _config(args)
    out = _ensure_dir(output_dir(config, args.out))
    part_a, part_b = generate(synthetic_spec(config))
    write_csv(part_a, os.path.join(out, "a.csv"))
    write_csv(part_b, os.path.join(out, "b.csv"))
    print(f"wrote {part_a.n_samples} rows to {out}/a.csv and {part_b.n_samples} rows to {out}/b.csv")
    return EXIT_OK


def cmd_partition(args) -> int:
    config = _config(args)
    out = _ensure_dir(output_dir(config, args.out))
    data = _read_input(args.input)
    if config.experiment.mode == "hfl":
        k = args.parts or config.hfl.clients
        parts = partition_horizontal(data, k, config.hfl.partition, config.experiment.seed)
        for index, part in enumerate(parts):
            write_csv(part, os.path.join(out, f"client-{index}.csv"))
        print(f"wrote {len(parts)} horizontal parts to {out}")
    else:
        if not args.split:
            raise ConfigError(MODULE, "vertical partitioning needs --split")
        try:
            split = [int(j) for j in args.split.split(",") if j.strip()]
        except ValueError as exc:
            raise ConfigError(MODULE, f"bad --split {args.split!r}") from exc
        part_a, part_b = partition_vertical(data, split)
        write_csv(part_a, os.path.join(out, "a.csv"))
        write_csv(part_b, os.path.join(out, "b.csv"))
        print(f"wrote vertical parts to {out}/a.csv and {out}/b.csv")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _config(args)
    out = _ensure_dir(output_dir(config, args.out))
    report, transcript = run_experiment(config)
    report_path = os.path.join(out, "report.txt")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report.render_kv())
    transcript.dump(args.transcript or os.path.join(out, "transcript.txt"))
    print(report.render_text(), end="")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        with open(args.path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(MODULE, f"cannot read report {args.path}: {exc}") from exc
    print(parse_report(text).render_text(), end="")
    return EXIT_OK


def cmd_classify(args) -> int:
    parts = [_read_input(path) for path in args.paths]
    print(classify_partition(parts))
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "partition": cmd_partition,
    "run": cmd_run,
    "report": cmd_report,
    "classify": cmd_classify,
}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return COMMANDS[args.verb](args)
    except FedBenchError as exc:
        logger.error("%s", exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
