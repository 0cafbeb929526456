"""
This module runs experiments: grids of training trials over E:I ratios,
initial weight scales, update noise levels and repeats, each one seeded
independently and recorded as a :obj:`py_ei_snn.manifest.RunManifest`; and
the reports that turn a set of manifests into CSV tables.

Configurations are JSON documents. Every key is optional; unknown keys are
errors::

    {
      "dataset": "fashion-mnist",
      "ei_ratio": ["80:20", "100:0"],
      "sigma_init_list": [0.001, 0.005],
      "sigma_noise_ratio_list": [0.0, 0.2],
      "repeats": 4,
      "seed": 0,
      "n_train": 10000,
      "train": {"epochs": 10, "batch_size": 256},
      "metrics": {"distance_cases": 500}
    }
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from py_ei_snn import datasets
from py_ei_snn.manifest import (  # noqa: F401
    read_manifest,
    success_rule,
    to_native,
    write_manifest,
)
from py_ei_snn.metrics import (
    PAIR_CATEGORIES,
    MetricConfig,
    kruskal_wallis,
    significance_stars,
    welch_t_test,
)
from py_ei_snn.models import NetworkSpec
from py_ei_snn.training import (
    NoiseModel,
    TrainConfig,
    init_weights,
    initial_rate_probe,
    save_weights,
    train_run,
)
from py_ei_snn.utils import (
    ConfigError,
    DataError,
    NumericError,
    ParameterError,
    atomic_write,
    make_rng,
)

logger = logging.getLogger(__name__)

DATA_DIR_ENV = "SNN_DATA_DIR"

# Log-spaced from silent to saturated initial activity
DEFAULT_SIGMA_GRID = tuple(float(s) for s in np.logspace(-4, -1, 8))

PRESETS = {
    "fashion-mnist": {"n_hidden": 100, "n_output": 10, "horizon_steps": 100},
    "shd": {"n_hidden": 200, "n_output": 20, "horizon_steps": 200},
}

BASELINE_RATIO = "100:0"
REPORT_TABLES = (
    "accuracy_vs_rate",
    "accuracy_vs_noise",
    "activity_by_epoch",
    "distance_categories",
)
GROUP_COLUMNS = ("dataset", "ei_ratio", "sigma_init", "sigma_noise_ratio")


def _ratio_list(value):
    if isinstance(value, str):
        return (datasets.parse_ei_ratio(value),)
    value = list(value)
    if len(value) == 2 and all(isinstance(v, int) for v in value):
        return (datasets.parse_ei_ratio(value),)
    if not value:
        raise ParameterError("ei_ratio list is empty")
    return tuple(datasets.parse_ei_ratio(v) for v in value)


def format_ratio(ratio):
    return f"{ratio[0]}:{ratio[1]}"


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A grid of training trials and everything needed to run them.
    ``sigma_init`` and ``seed`` of ``train`` are set per trial from
    ``sigma_init_list`` and ``seed``.
    """

    dataset: str = "fashion-mnist"
    ei_ratio: tuple = ((80, 20),)
    sigma_init_list: tuple = DEFAULT_SIGMA_GRID
    sigma_noise_ratio_list: tuple = (0.0,)
    repeats: int = 1
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    noise_layers: tuple = ("input", "output")
    hidden_units: int = None
    n_train: int = None
    n_test: int = None
    classes: tuple = None
    data_dir: str = None
    workers: int = 1

    def __post_init__(self):
        if self.dataset not in PRESETS:
            raise ParameterError(f"dataset must be one of {sorted(PRESETS)}, got {self.dataset!r}")
        object.__setattr__(self, "ei_ratio", _ratio_list(self.ei_ratio))
        object.__setattr__(self, "sigma_init_list", tuple(float(s) for s in self.sigma_init_list))
        object.__setattr__(
            self, "sigma_noise_ratio_list", tuple(float(s) for s in self.sigma_noise_ratio_list)
        )
        object.__setattr__(self, "noise_layers", tuple(self.noise_layers))
        if self.classes is not None:
            object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))
        if not self.sigma_init_list or min(self.sigma_init_list) <= 0:
            raise ParameterError("sigma_init_list must hold positive values")
        if not self.sigma_noise_ratio_list or min(self.sigma_noise_ratio_list) < 0:
            raise ParameterError("sigma_noise_ratio_list must hold non-negative values")
        if self.repeats < 1:
            raise ParameterError("repeats must be at least 1")
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")
        if self.workers < 1:
            raise ParameterError("workers must be at least 1")
        for name in ("hidden_units", "n_train", "n_test"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ParameterError(f"{name} must be at least 1")

    @classmethod
    def from_dict(cls, d):
        """
        Builds a configuration from a parsed JSON document, rejecting unknown
        keys at every level.
        """
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        d = dict(d)
        _check_keys(d, {f.name for f in fields(cls)}, "")
        train = d.pop("train", {})
        metric = d.pop("metrics", {})
        if not isinstance(train, dict) or not isinstance(metric, dict):
            raise ConfigError("'train' and 'metrics' must be JSON objects")
        _check_keys(train, TrainConfig.field_names() - {"sigma_init", "seed"}, "train.")
        _check_keys(metric, {f.name for f in fields(MetricConfig)}, "metrics.")
        try:
            if "histogram_range" in metric and metric["histogram_range"] is not None:
                metric["histogram_range"] = tuple(metric["histogram_range"])
            return cls(
                train=TrainConfig.for_dataset(d.get("dataset", cls.dataset), **train),
                metrics=MetricConfig(**metric),
                **d,
            )
        except (ParameterError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self):
        d = asdict(self)
        d["ei_ratio"] = [format_ratio(r) for r in self.ei_ratio]
        return d

    @property
    def data_root(self):
        return self.data_dir or os.environ.get(DATA_DIR_ENV)


def _check_keys(d, allowed, prefix):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown configuration key {prefix}{unknown[0]}")


def load_config(path, dataset=None):
    """
    Reads an :obj:`ExperimentConfig` from a JSON file. A ``dataset`` replaces
    the file's one before the training defaults are derived, so only the
    ``train`` keys the file sets explicitly survive the switch.
    """
    try:
        with open(path, "r", encoding="utf8") as f:
            d = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if dataset is not None and isinstance(d, dict):
        d = {**d, "dataset": dataset}
    return ExperimentConfig.from_dict(d)


@dataclass(frozen=True)
class Trial:
    index: int
    ei_ratio: tuple
    sigma_init: float
    sigma_noise_ratio: float
    repeat: int
    seed: int

    @property
    def filename(self):
        return f"trial-{self.index:04d}.json"


def trial_grid(cfg):
    """
    Every trial of a configuration: the Cartesian product of E:I ratios,
    initial scales, noise ratios and repeats. Trial ``k`` is seeded with
    ``cfg.seed + k``.

    Examples:
        >>> from py_ei_snn.experiments import ExperimentConfig, trial_grid
        >>> cfg = ExperimentConfig(sigma_init_list=[0.001, 0.01, 0.1], repeats=2)
        >>> [t.seed for t in trial_grid(cfg)]
        [0, 1, 2, 3, 4, 5]
    """
    trials = []
    for ratio in cfg.ei_ratio:
        for sigma in cfg.sigma_init_list:
            for noise in cfg.sigma_noise_ratio_list:
                for repeat in range(cfg.repeats):
                    index = len(trials)
                    trials.append(Trial(index, ratio, sigma, noise, repeat, cfg.seed + index))
    return trials


def network_for(cfg, ei_ratio, dataset):
    """
    The dataset preset network, sized to the inputs ``dataset`` provides.
    """
    preset = PRESETS[cfg.dataset]
    return NetworkSpec.from_ratio(
        n_input=dataset.n_units,
        n_hidden=cfg.hidden_units or preset["n_hidden"],
        n_output=preset["n_output"],
        ei_ratio=ei_ratio,
        horizon_steps=dataset.horizon_steps,
    )


def check_data(cfg):
    """
    Raises :obj:`DataError` unless every file the configured dataset needs is
    present.
    """
    if cfg.data_root is None:
        raise DataError(f"no data directory: pass --data-dir or set {DATA_DIR_ENV}")
    return datasets.dataset_files(cfg.dataset, cfg.data_root)


def load_data(cfg):
    """
    Loads, filters and subsamples the training and test sets.

    Returns:
        ``(train_set, test_set)`` :obj:`py_ei_snn.datasets.SpikeDataset` objects.
    """
    check_data(cfg)
    preset = PRESETS[cfg.dataset]
    splits = []
    for split in ("train", "test"):
        if cfg.dataset == "fashion-mnist":
            encoding = datasets.EncodingConfig(horizon_steps=preset["horizon_steps"])
            data = datasets.LatencyImageDataset(
                datasets.load_fashion_mnist(cfg.data_root, split), encoding
            )
        else:
            data = datasets.EventDataset(
                datasets.load_shd(cfg.data_root, split), preset["horizon_steps"]
            )
        if cfg.classes is not None:
            data = data.filter_classes(cfg.classes)
        if len(data) == 0:
            raise DataError(f"no {split} cases left after filtering classes {cfg.classes}")
        n = cfg.n_train if split == "train" else cfg.n_test
        data = data.sample(n, make_rng(cfg.seed, "subset"))
        logger.info("%s %s set: %d cases", cfg.dataset, split, len(data))
        splits.append(data)
    return tuple(splits)


def run_trial(cfg, trial, train_set, test_set, out_dir=None):
    """
    Trains one trial. With ``out_dir`` the final weights and then the manifest
    are written there; an existing manifest marks the trial complete.
    """
    spec = network_for(cfg, trial.ei_ratio, train_set)
    train_cfg = replace(cfg.train, sigma_init=trial.sigma_init, seed=trial.seed)
    noise = NoiseModel(trial.sigma_noise_ratio, trial.seed, cfg.noise_layers)
    logger.info(
        "trial %d: E:I %s, sigma_init %g, noise %g, repeat %d",
        trial.index, format_ratio(trial.ei_ratio), trial.sigma_init,
        trial.sigma_noise_ratio, trial.repeat,
    )
    manifest, weights = train_run(
        spec, train_set, train_cfg, noise, test_set, cfg.metrics, cfg.dataset
    )
    manifest.trial_index = trial.index
    manifest.ei_ratio = list(trial.ei_ratio)
    manifest.repeat = trial.repeat
    manifest.config["experiment"] = cfg.to_dict()
    manifest = type(manifest).from_dict(manifest.to_dict())

    if out_dir is not None:
        stem = os.path.splitext(trial.filename)[0]
        save_weights(os.path.join(out_dir, f"{stem}-weights.bin"), weights)
        write_manifest(manifest, os.path.join(out_dir, trial.filename))
        logger.info("trial %d written to %s", trial.index, out_dir)
    return manifest


# Settings that do not change what a trial computes
RESUME_IGNORED = (
    "workers", "data_dir", "ei_ratio", "sigma_init_list", "sigma_noise_ratio_list",
    "repeats", "seed",
)


def _run_settings(experiment):
    return {k: v for k, v in to_native(experiment).items() if k not in RESUME_IGNORED}


def _check_resumable(manifest, cfg, trial, path):
    """
    Raises :obj:`ConfigError` unless the manifest at ``path`` was produced by
    ``trial`` under the same run settings as ``cfg``.
    """
    found = (
        tuple(manifest.ei_ratio), manifest.sigma_init, manifest.sigma_noise_ratio,
        manifest.seed,
    )
    expected = (
        tuple(trial.ei_ratio), trial.sigma_init, trial.sigma_noise_ratio, trial.seed,
    )
    if found != expected:
        raise ConfigError(
            f"{path} holds E:I {format_ratio(found[0])}, sigma_init {found[1]}, noise "
            f"{found[2]}, seed {found[3]}, but trial {trial.index} is E:I "
            f"{format_ratio(expected[0])}, sigma_init {expected[1]}, noise {expected[2]}, "
            f"seed {expected[3]}; use a fresh output directory"
        )
    stored = manifest.config.get("experiment")
    if stored is None or _run_settings(stored) != _run_settings(cfg.to_dict()):
        raise ConfigError(
            f"{path} was written under different run settings; use a fresh output directory"
        )


def run_sweep(cfg, out_dir=None, workers=None, data=None):
    """
    Runs every trial of :func:`trial_grid`, ``workers`` at a time. Trials whose
    manifest already exists in ``out_dir`` are read back instead of rerun, so
    an interrupted sweep resumes where it stopped. A manifest written for a
    different trial or under different run settings raises
    :obj:`ConfigError`.

    Args:
        cfg (:obj:`ExperimentConfig`): The sweep.
        out_dir (:obj:`str`): Directory for manifests and weights.
        workers (:obj:`int`): Parallel trials, ``cfg.workers`` if omitted.
        data (:obj:`tuple`): Preloaded ``(train_set, test_set)``; loaded from
            the data directory if omitted.

    Returns:
        A :obj:`list` of manifests in trial order.
    """
    if data is None:
        check_data(cfg)
    trials = trial_grid(cfg)
    done = {}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for trial in trials:
            path = os.path.join(out_dir, trial.filename)
            if os.path.exists(path):
                manifest = read_manifest(path)
                _check_resumable(manifest, cfg, trial, path)
                done[trial.index] = manifest
        if done:
            logger.info("%d of %d trials already complete", len(done), len(trials))
    pending = [t for t in trials if t.index not in done]
    if pending:
        train_set, test_set = data if data is not None else load_data(cfg)
        results = Parallel(n_jobs=workers or cfg.workers)(
            delayed(run_trial)(cfg, t, train_set, test_set, out_dir) for t in pending
        )
        done.update((t.index, m) for t, m in zip(pending, results))
    return [done[t.index] for t in trials]


def read_manifests(directory):
    """
    Reads every ``trial-*.json`` manifest of a sweep directory, in trial order.
    """
    if not os.path.isdir(directory):
        raise DataError(f"not a directory: {directory}")
    names = sorted(
        n for n in os.listdir(directory) if n.startswith("trial-") and n.endswith(".json")
    )
    if not names:
        raise DataError(f"no manifests in {directory}")
    return [read_manifest(os.path.join(directory, n)) for n in names]


def probe_grid(cfg, data=None):
    """
    Initial hidden firing rate of untrained networks for every E:I ratio and
    initial scale of the configuration, to choose scales whose activity lies
    in a target band.
    """
    train_set = (data if data is not None else load_data(cfg))[0]
    rows = []
    for trial in trial_grid(replace(cfg, sigma_noise_ratio_list=(0.0,), repeats=1)):
        spec = network_for(cfg, trial.ei_ratio, train_set)
        w_in, w_out = init_weights(
            spec, trial.sigma_init, make_rng(trial.seed, "init"), cfg.train.sigma_out
        )
        rate = initial_rate_probe(
            spec, w_in, w_out, train_set, cfg.metrics.probe_cases, make_rng(trial.seed, "probe")
        )
        rows.append(
            {
                "ei_ratio": format_ratio(trial.ei_ratio),
                "sigma_init": trial.sigma_init,
                "initial_rate_hz": rate,
            }
        )
    return pd.DataFrame(rows, columns=["ei_ratio", "sigma_init", "initial_rate_hz"])


def _trial_row(m):
    return {
        "trial_index": m.trial_index,
        "dataset": m.dataset,
        "ei_ratio": format_ratio(m.ei_ratio),
        "sigma_init": m.sigma_init,
        "sigma_noise_ratio": m.sigma_noise_ratio,
        "repeat": m.repeat,
        "seed": m.seed,
    }


def _accuracy_vs_rate(manifests, grouping):
    rows = []
    for m in manifests:
        row = _trial_row(m)
        row.update(
            initial_rate_hz=m.initial_rate_hz,
            peak_accuracy=m.peak_accuracy,
            final_accuracy=m.final_accuracy,
            success=m.success,
        )
        rows.append(row)
    df = pd.DataFrame(rows)
    return df.sort_values(list(grouping) + ["initial_rate_hz", "trial_index"], kind="mergesort")


def _welch_or_none(a, b):
    try:
        return welch_t_test(a, b)
    except (DataError, NumericError):
        return None


def _accuracy_vs_noise(manifests, grouping):
    keys = list(dict.fromkeys(list(grouping) + ["sigma_noise_ratio"]))
    df = pd.DataFrame(
        [dict(_trial_row(m), tail_accuracy=m.tail_accuracy()) for m in manifests]
    )
    groups = {k: g["tail_accuracy"].dropna().to_numpy() for k, g in df.groupby(keys, sort=True)}

    rows = []
    for key, values in groups.items():
        key = key if isinstance(key, tuple) else (key,)
        row = dict(zip(keys, key))
        row.update(
            n=int(values.size),
            mean_accuracy=float(values.mean()) if values.size else None,
            std_accuracy=float(values.std(ddof=1)) if values.size > 1 else None,
            baseline_difference=None,
            t_statistic=None,
            p_value=None,
            significance="",
        )
        if "ei_ratio" in keys and row["ei_ratio"] != BASELINE_RATIO:
            base_key = tuple(BASELINE_RATIO if k == "ei_ratio" else v for k, v in zip(keys, key))
            baseline = groups.get(base_key)
            if baseline is not None and baseline.size and values.size:
                row["baseline_difference"] = float(values.mean() - baseline.mean())
                result = _welch_or_none(values, baseline)
                if result is not None:
                    row["t_statistic"] = result.statistic
                    row["p_value"] = result.p_value
                    row["significance"] = significance_stars(result.p_value)
        rows.append(row)
    return pd.DataFrame(rows)


def _activity_by_epoch(manifests, grouping):
    rows = []
    for m in manifests:
        base = _trial_row(m)
        for record in m.epochs:
            activity = record["activity"]
            per_class = [("all", activity, record["accuracy"])]
            per_class += [
                (c, activity["per_class"][c], record["per_class_accuracy"][int(c)])
                for c in sorted(activity["per_class"], key=int)
            ]
            for label, values, accuracy in per_class:
                rows.append(
                    dict(
                        base,
                        epoch=record["epoch"],
                        label=label,
                        accuracy=accuracy,
                        spikes_excitatory=values["spikes_per_case_excitatory"],
                        spikes_inhibitory=values["spikes_per_case_inhibitory"],
                        percent_excitatory=values["percent_excitatory"],
                        success=m.success,
                    )
                )
    return pd.DataFrame(rows)


def _distance_row(members, phase, accuracy):
    row = {"phase": phase, "n": len(members)}
    row["mean_accuracy"] = float(np.mean(accuracy)) if len(accuracy) else None
    samples = []
    for category in PAIR_CATEGORIES:
        values = [d[category] for d in members if d.get(category) is not None]
        row[f"median_{category}"] = float(np.median(values)) if values else None
        samples.append(values)
    row["kruskal_wallis_p"] = None
    if all(samples) and sum(len(s) for s in samples) >= 3:
        try:
            row["kruskal_wallis_p"] = kruskal_wallis(samples).p_value
        except (DataError, NumericError):
            pass
    return row


def _distance_categories(manifests, grouping):
    keys = list(grouping)
    rows = []
    frame = pd.DataFrame([_trial_row(m) for m in manifests])
    for key, group in frame.groupby(keys, sort=True):
        key = key if isinstance(key, tuple) else (key,)
        members = [manifests[i] for i in group.index]
        phases = [
            ("pre", members, lambda m: m.epochs[0]["accuracy"] if m.epochs else None, "pre"),
            ("success", [m for m in members if m.success], lambda m: m.peak_accuracy, "post"),
            ("failure", [m for m in members if not m.success], lambda m: m.peak_accuracy, "post"),
        ]
        for phase, selected, accuracy_of, stage in phases:
            distances = [m.distances[stage] for m in selected if stage in m.distances]
            accuracy = [a for a in map(accuracy_of, selected) if a is not None]
            rows.append(dict(zip(keys, key), **_distance_row(distances, phase, accuracy)))
    return pd.DataFrame(rows)


def report(manifests, grouping=("dataset", "ei_ratio"), out_dir=None):
    """
    Builds the four report tables from manifests alone:

    * ``accuracy_vs_rate``: one row per trial with its measured initial
      firing rate and peak and final accuracy.
    * ``accuracy_vs_noise``: mean accuracy over the last epochs per group and
      noise ratio, compared with the 100:0 networks by Welch t-test.
    * ``activity_by_epoch``: excitatory and inhibitory spikes per case and
      percent excitatory, per trial, epoch and class.
    * ``distance_categories``: per group, the median E-E, E-I and I-I
      distances before training and after training for successful and failed
      networks, with the Kruskal-Wallis p-value across the categories.

    Args:
        manifests (:obj:`list`): :obj:`py_ei_snn.manifest.RunManifest` objects.
        grouping (:obj:`tuple`): Columns to group by, from ``dataset``,
            ``ei_ratio``, ``sigma_init`` and ``sigma_noise_ratio``.
        out_dir (:obj:`str`): If given, each table is written there as
            ``<name>.csv``.

    Returns:
        A :obj:`dict` of :obj:`pandas.DataFrame` keyed by table name.
    """
    if not manifests:
        raise DataError("cannot report on an empty list of manifests")
    grouping = tuple(grouping)
    unknown = set(grouping) - set(GROUP_COLUMNS)
    if not grouping or unknown:
        raise ParameterError(f"grouping must be drawn from {GROUP_COLUMNS}, got {grouping}")

    tables = {
        "accuracy_vs_rate": _accuracy_vs_rate(manifests, grouping),
        "accuracy_vs_noise": _accuracy_vs_noise(manifests, grouping),
        "activity_by_epoch": _activity_by_epoch(manifests, grouping),
        "distance_categories": _distance_categories(manifests, grouping),
    }
    if out_dir is not None:
        for name, df in tables.items():
            atomic_write(os.path.join(out_dir, f"{name}.csv"), df.to_csv(index=False))
        logger.info("wrote %d tables to %s", len(tables), out_dir)
    return tables
