"""Command line entry point"""
import os
import sys
import logging
import argparse

from . import config
from . import runner
from .structures import (
    RefinerError, ValidationError, CorpusError, MetricError, TrainingError,
    ModelFileError, GeneratorError, DiscriminatorError
)

# First match wins; anything else from the refiner is a config problem
EXIT_CODES = (
    (ValidationError, 1),
    (CorpusError, 2),
    (MetricError, 2),
    (TrainingError, 3),
    (ModelFileError, 4),
    (DiscriminatorError, 4),
    (GeneratorError, 5),
    (RefinerError, 1),
)


def exit_code_for(error):
    """Fixed exit code of an error"""
    for error_type, code in EXIT_CODES:
        if isinstance(error, error_type):
            return code
    raise error


class RefinerArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the configuration error code, 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(exit_code_for(ValidationError(message)),
                  "{}: error: {}\n".format(self.prog, message))


def build_parser():
    """Subcommands and their flags"""
    parser = RefinerArgumentParser(
        prog="counterfactual_refiner",
        description="Refine documents until a discriminator's prediction "
                    "flips.")
    commands = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="TOML run configuration")
    common.add_argument("--seed", type=int, help="run seed")
    common.add_argument("--out", metavar="DIR", help="run directory")
    common.add_argument("--parallelism", type=int, metavar="N",
                        help="documents refined at once")
    common.add_argument("--quiet", action="store_true",
                        help="only warnings, no progress bar")

    generation = argparse.ArgumentParser(add_help=False)
    generation.add_argument("--strategy", choices=("msmi", "prompt"))
    generation.add_argument("--generator",
                            choices=tuple(config.GENERATOR_FLAG_TO_KIND))

    commands.add_parser("train", parents=[common],
                        help="train the built-in discriminator")
    commands.add_parser("refine", parents=[common, generation],
                        help="targeted refinement of the test split")
    commands.add_parser("attack", parents=[common, generation],
                        help="untargeted attack on correctly classified "
                             "documents")
    report = commands.add_parser("report", parents=[common],
                                 help="recompute a run's report from its "
                                      "traces")
    report.add_argument("--traces", metavar="PATH",
                        help="trace file, default <out>/traces.jsonl")
    commands.add_parser("stats", parents=[common],
                        help="corpus statistics")
    compare = commands.add_parser("compare",
                                  help="compare report.json files")
    compare.add_argument("reports", nargs="+", metavar="REPORT")
    compare.add_argument("--quiet", action="store_true")
    return parser


def overrides_from(args):
    """Dotted config overrides for the flags that were given"""
    generator = getattr(args, "generator", None)
    return {
        "run.seed": args.seed,
        "run.out_dir": args.out,
        "run.parallelism": args.parallelism,
        "engine.strategy": getattr(args, "strategy", None),
        "generator.kind": config.GENERATOR_FLAG_TO_KIND.get(generator),
    }


def _config_path(args):
    if args.config is None and args.command == "report" and args.out:
        snapshot = os.path.join(args.out, config.SNAPSHOT_NAME)
        if os.path.isfile(snapshot):
            return snapshot
    return args.config


def dispatch(args):
    """Run the parsed command"""
    if args.command == "compare":
        runner.compare(args.reports)
        return
    settings = config.load_config(_config_path(args), overrides_from(args))
    progress = not args.quiet and sys.stderr.isatty()
    kwargs = {}
    if args.command == "report":
        kwargs["traces_path"] = args.traces
    runner.execute(args.command, settings, progress, **kwargs)


def main(argv=None):
    """Exit code of one command line invocation"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="[%(levelname)s]: %(message)s")
    try:
        dispatch(args)
    except RefinerError as error:
        logging.error("%s", error)
        return exit_code_for(error)
    return 0
