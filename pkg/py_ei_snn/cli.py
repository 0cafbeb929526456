"""
Command line interface::

    snn-ei [-v | -q] train           [options]
    snn-ei [-v | -q] sweep           [options]
    snn-ei [-v | -q] probe           [options]
    snn-ei [-v | -q] analyze         MANIFEST_DIR --out DIR
    snn-ei [-v | -q] convert-events  INPUT.npz OUTPUT.spkevt

Exit codes: 0 on success, 2 for configuration and parameter errors, 3 for
missing or malformed data, 4 for numeric failures.
"""

import argparse
import logging
import os
import sys
from dataclasses import replace

from py_ei_snn import __version__, datasets, experiments
from py_ei_snn.training import TrainConfig
from py_ei_snn.utils import (
    ConfigError,
    DataError,
    NumericError,
    ParameterError,
    ShapeError,
    StateError,
    configure_logging,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_INTERNAL = 1


def _float_list(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def _experiment_options():
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="base seed of the trial grid")
    parser.add_argument("--workers", type=int, help="trials run in parallel")
    parser.add_argument("--dataset", choices=sorted(experiments.PRESETS))
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--ei", help="E:I ratio(s), e.g. 80:20 or 80:20,100:0")
    parser.add_argument("--sigma-init", type=_float_list, help="initial weight scale(s)")
    parser.add_argument("--noise-ratio", type=_float_list, help="update noise ratio(s)")
    parser.add_argument("--repeats", type=int)
    parser.add_argument("--n-train", type=int, help="seeded training subset size")
    parser.add_argument("--n-test", type=int, help="seeded test subset size")
    parser.add_argument("--classes", type=_int_list, help="keep only these labels")
    parser.add_argument(
        "--data-dir", help=f"dataset directory (default ${experiments.DATA_DIR_ENV})"
    )
    return parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="snn-ei",
        description="Train and analyse spiking networks with excitatory and "
        "inhibitory hidden neurons.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")

    verbs = parser.add_subparsers(dest="verb", required=True)
    options = _experiment_options()
    verbs.add_parser("train", parents=[options], help="train a single trial")
    verbs.add_parser("sweep", parents=[options], help="run every trial of a grid")
    verbs.add_parser("probe", parents=[options], help="initial firing rate of untrained networks")

    analyze = verbs.add_parser("analyze", help="build CSV tables from manifests")
    analyze.add_argument("manifests", help="directory of trial manifests")
    analyze.add_argument("--out", required=True, help="directory for the CSV tables")
    analyze.add_argument(
        "--group-by",
        default="dataset,ei_ratio",
        help=f"comma separated columns from {','.join(experiments.GROUP_COLUMNS)}",
    )

    convert = verbs.add_parser("convert-events", help="convert an .npz event export")
    convert.add_argument("input", help=".npz archive")
    convert.add_argument("output", help="event file to write")
    convert.add_argument("--classes", type=_int_list, help="keep only these labels")
    convert.add_argument("--max-per-class", type=int, help="cap samples per class")
    convert.add_argument("--n-units", type=int, default=700)
    return parser


def build_config(args):
    """
    The experiment configuration of a command: the ``--config`` file (or the
    dataset defaults) with every given flag applied on top.
    """
    if args.config:
        cfg = experiments.load_config(args.config, args.dataset)
    else:
        dataset = args.dataset or "fashion-mnist"
        cfg = experiments.ExperimentConfig(
            dataset=dataset, train=TrainConfig.for_dataset(dataset)
        )
    overrides = {
        "dataset": args.dataset,
        "seed": args.seed,
        "workers": args.workers,
        "ei_ratio": args.ei.split(",") if args.ei else None,
        "sigma_init_list": args.sigma_init,
        "sigma_noise_ratio_list": args.noise_ratio,
        "repeats": args.repeats,
        "n_train": args.n_train,
        "n_test": args.n_test,
        "classes": args.classes,
        "data_dir": args.data_dir,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.epochs is not None:
        overrides["train"] = replace(cfg.train, epochs=args.epochs)
    return replace(cfg, **overrides)


def _train(args):
    cfg = build_config(args)
    trials = experiments.trial_grid(cfg)
    if len(trials) != 1:
        raise ConfigError(
            f"train runs one trial but the configuration describes {len(trials)}; "
            "use sweep, or give a single --ei, --sigma-init and --noise-ratio"
        )
    train_set, test_set = experiments.load_data(cfg)
    manifest = experiments.run_trial(cfg, trials[0], train_set, test_set, args.out or ".")
    print(
        f"final accuracy {manifest.final_accuracy}, peak {manifest.peak_accuracy}, "
        f"initial rate {manifest.initial_rate_hz:.4g} Hz, success {manifest.success}"
    )


def _sweep(args):
    cfg = build_config(args)
    manifests = experiments.run_sweep(cfg, args.out or ".", args.workers)
    n_success = sum(1 for m in manifests if m.success)
    print(f"{len(manifests)} trials, {n_success} successful")


def _probe(args):
    cfg = build_config(args)
    table = experiments.probe_grid(cfg)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        table.to_csv(os.path.join(args.out, "probe.csv"), index=False)
    print(table.to_string(index=False))


def _analyze(args):
    manifests = experiments.read_manifests(args.manifests)
    grouping = [g for g in args.group_by.split(",") if g]
    tables = experiments.report(manifests, grouping, args.out)
    for name in experiments.REPORT_TABLES:
        print(f"{name}: {len(tables[name])} rows")


def _convert_events(args):
    n = datasets.convert_npz_events(
        args.input, args.output, args.classes, args.max_per_class, args.n_units
    )
    print(f"wrote {n} samples to {args.output}")


COMMANDS = {
    "train": _train,
    "sweep": _sweep,
    "probe": _probe,
    "analyze": _analyze,
    "convert-events": _convert_events,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(1 if args.verbose else -1 if args.quiet else 0)
    try:
        COMMANDS[args.verb](args)
    except (ConfigError, ParameterError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except (DataError, ShapeError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except NumericError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERIC
    except StateError as exc:
        logger.error("%s", exc)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
