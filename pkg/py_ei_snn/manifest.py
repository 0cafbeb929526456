"""
The per-trial run record written by training and read back by the analysis
tools, its JSON serialisation and the per-dataset success rules.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from py_ei_snn.utils import ConfigError, DataError, FormatError, atomic_write

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1

# Accuracy the network must beat for a run to count as successful
SUCCESS_THRESHOLDS = {"fashion-mnist": 0.5, "shd": 0.3}
SHD_TAIL_EPOCHS = 25
TAIL_EPOCHS = 10


@dataclass
class RunManifest:
    """
    Everything recorded about one training run. All values are JSON-native;
    undefined quantities are ``None``.

    ``epochs`` holds one evaluation record per epoch, starting with the
    untrained network at epoch 0. ``weight_stats`` maps snapshot epochs (as
    strings) to statistics of both weight matrices. ``distances``, ``isi``
    and ``activity`` hold the ``"pre"`` and ``"post"`` training analyses.
    """

    dataset: str
    ei_ratio: list
    sigma_init: float
    sigma_noise_ratio: float
    seed: int
    config: dict
    trial_index: int = 0
    repeat: int = 0
    initial_rate_hz: float = None
    epochs: list = field(default_factory=list)
    weight_stats: dict = field(default_factory=dict)
    distances: dict = field(default_factory=dict)
    isi: dict = field(default_factory=dict)
    activity: dict = field(default_factory=dict)
    sign_violations: int = 0
    success: bool = None
    wall_clock_seconds: float = None
    version: int = MANIFEST_VERSION

    @property
    def accuracies(self):
        """
        Test accuracy after every trained epoch (epoch 0 excluded).
        """
        return [e["accuracy"] for e in self.epochs if e["epoch"] > 0]

    @property
    def final_accuracy(self):
        acc = self.accuracies
        return acc[-1] if acc else None

    @property
    def peak_accuracy(self):
        acc = self.accuracies
        return max(acc) if acc else None

    def tail_accuracy(self, n_epochs=TAIL_EPOCHS):
        """
        Mean test accuracy over the last ``min(n_epochs, epochs)`` epochs.
        """
        acc = self.accuracies
        if not acc:
            return None
        return float(np.mean(acc[-n_epochs:]))

    def to_dict(self):
        return to_native(asdict(self))

    def comparable(self):
        """
        The manifest without its timing field, for comparing reruns.
        """
        d = self.to_dict()
        d.pop("wall_clock_seconds")
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise FormatError(f"unknown manifest fields {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise FormatError(f"incomplete manifest: {exc}") from exc


def to_native(value):
    """
    Recursively converts numpy scalars and arrays to JSON-native values,
    mapping non-finite floats to ``None``.

    Examples:
        >>> import numpy as np
        >>> from py_ei_snn.manifest import to_native
        >>> to_native({"a": np.float64(0.5), "b": (1, np.nan)})
        {'a': 0.5, 'b': [1, None]}
    """
    if isinstance(value, dict):
        return {str(k): to_native(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_native(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_native(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dumps_manifest(manifest):
    return json.dumps(manifest.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_manifest(manifest, path):
    """
    Writes a manifest as sorted, indented JSON. Serialising a manifest read
    back with :func:`read_manifest` reproduces the file byte for byte.
    """
    atomic_write(path, dumps_manifest(manifest))


def read_manifest(path):
    try:
        with open(path, "r", encoding="utf8") as f:
            d = json.load(f)
    except FileNotFoundError:
        raise DataError(f"manifest not found: {path}")
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise FormatError(f"{path}: manifest must be a JSON object")
    return RunManifest.from_dict(d)


def success_rule(manifest):
    """
    Whether a run succeeded. Fashion-MNIST runs must reach a peak test
    accuracy above 50%; SHD runs must average above 30% over their last 25
    epochs (all epochs if fewer were trained). Both comparisons are strict.

    Examples:
        >>> from py_ei_snn.manifest import RunManifest, success_rule
        >>> m = RunManifest("fashion-mnist", [80, 20], 0.001, 0.0, 0, {})
        >>> m.epochs = [{"epoch": 1, "accuracy": 0.42}, {"epoch": 2, "accuracy": 0.51}]
        >>> success_rule(m)
        True
    """
    if manifest.dataset not in SUCCESS_THRESHOLDS:
        raise ConfigError(f"no success rule for dataset {manifest.dataset!r}")
    if not manifest.accuracies:
        return False
    threshold = SUCCESS_THRESHOLDS[manifest.dataset]
    if manifest.dataset == "shd":
        return bool(manifest.tail_accuracy(SHD_TAIL_EPOCHS) > threshold)
    return bool(manifest.peak_accuracy > threshold)
