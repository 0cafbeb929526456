"""
This module trains the hidden and readout weights with surrogate-gradient
backpropagation through time under Dale's law: every hidden neuron is either
excitatory, with only non-negative outgoing weights, or inhibitory, with only
non-positive ones. Inputs are excitatory.

A training step simulates a batch, computes the mean per-step softmax
cross-entropy of the readout voltages, backpropagates it through the unrolled
network (the spike's derivative replaced by :func:`surrogate_grad`, the reset
treated as constant), takes an Adam step, optionally adds Gaussian noise to
the updated weights and finally zeroes every weight whose sign disagrees with
its source neuron.
"""

import logging
import os
import struct
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from py_ei_snn import metrics
from py_ei_snn.datasets import make_batches
from py_ei_snn.manifest import SUCCESS_THRESHOLDS, RunManifest, success_rule
from py_ei_snn.models import NeuronParams, predict, run_network
from py_ei_snn.utils import (
    DataError,
    FormatError,
    NumericError,
    ParameterError,
    ShapeError,
    StateError,
    atomic_write,
    make_rng,
    read_binary,
)

logger = logging.getLogger(__name__)

INPUT_HIDDEN = 0
HIDDEN_OUTPUT = 1
MATRIX_NAMES = {INPUT_HIDDEN: "input", HIDDEN_OUTPUT: "output"}

WEIGHTS_MAGIC = b"SNNWT001"
_WEIGHTS_HEADER = struct.Struct("<8sIIB")

SNAPSHOT_EPOCHS = (0, 1, 10)


class SignMask:
    """
    Sign constraint of a weight matrix: one entry per source neuron (row),
    ``+1`` for excitatory and ``-1`` for inhibitory.
    """

    def __init__(self, signs):
        signs = np.asarray(signs, dtype=np.int8)
        if signs.ndim != 1 or not np.isin(signs, (-1, 1)).all():
            raise ParameterError("sign mask entries must be +1 or -1")
        self.signs = signs

    @classmethod
    def excitatory(cls, n_sources):
        return cls(np.ones(n_sources, dtype=np.int8))

    @classmethod
    def from_partition(cls, is_excitatory):
        return cls(np.where(np.asarray(is_excitatory, dtype=bool), 1, -1))

    def __len__(self):
        return self.signs.size

    def __eq__(self, other):
        if not isinstance(other, SignMask):
            return NotImplemented
        return np.array_equal(self.signs, other.signs)

    def clamp(self, values):
        """
        Returns ``values`` with every entry of the wrong sign set to zero.

        Examples:
            >>> import numpy as np
            >>> from py_ei_snn.training import SignMask
            >>> SignMask([1, -1]).clamp(np.array([[-0.5, 0.5], [-0.5, 0.5]])).tolist()
            [[0.0, 0.5], [-0.5, 0.0]]
        """
        positive = (self.signs > 0)[:, np.newaxis]
        return np.where(positive, np.maximum(values, 0.0), np.minimum(values, 0.0))

    def violations(self, values):
        """
        Number of entries whose sign disagrees with their source neuron.
        """
        signed = values * self.signs[:, np.newaxis]
        return int(np.count_nonzero(signed < 0))


class WeightMatrix:
    """
    A ``(sources, targets)`` weight matrix together with the sign of each
    source neuron. Instances are treated as immutable: updates return new
    matrices.
    """

    def __init__(self, values, mask, matrix_id=INPUT_HIDDEN):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got shape {values.shape}")
        if len(mask) != values.shape[0]:
            raise ShapeError(
                f"sign mask has {len(mask)} entries for {values.shape[0]} rows"
            )
        if matrix_id not in MATRIX_NAMES:
            raise ParameterError(f"unknown matrix id {matrix_id}")
        self.values = values
        self.mask = mask
        self.matrix_id = matrix_id

    @property
    def shape(self):
        return self.values.shape

    @property
    def name(self):
        return MATRIX_NAMES[self.matrix_id]

    def violations(self):
        return self.mask.violations(self.values)

    def with_values(self, values):
        return WeightMatrix(values, self.mask, self.matrix_id)

    def __eq__(self, other):
        if not isinstance(other, WeightMatrix):
            return NotImplemented
        return (
            self.matrix_id == other.matrix_id
            and self.mask == other.mask
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"WeightMatrix({self.name}, shape={self.shape})"


@dataclass(frozen=True)
class TrainConfig:
    """
    Optimisation settings of one training run.

    ``sigma_init`` is the standard deviation of the Gaussian whose absolute
    values initialise the input-hidden weights; ``sigma_out`` does the same
    for hidden-readout weights. ``seed`` is the trial seed every random
    stream is derived from.
    """

    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 30
    sigma_init: float = 0.005
    sigma_out: float = 0.01
    surrogate_beta: float = 10.0
    loss_mode: str = "per-step-nll"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "sigma_init", "sigma_out", "surrogate_beta", "adam_eps"):
            value = getattr(self, name)
            if not value > 0:
                raise ParameterError(f"{name} must be positive, got {value}")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be at least 1")
        if self.epochs < 0:
            raise ParameterError("epochs must be non-negative")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ParameterError(f"{name} must lie in [0, 1)")
        if self.loss_mode != "per-step-nll":
            raise ParameterError(f"unsupported loss mode {self.loss_mode!r}")
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")

    @classmethod
    def for_dataset(cls, dataset, **overrides):
        """
        Training defaults for ``"fashion-mnist"`` (30 epochs) or ``"shd"`` (200
        epochs).
        """
        defaults = {"fashion-mnist": {"epochs": 30}, "shd": {"epochs": 200}}
        if dataset not in defaults:
            raise ParameterError(f"unknown dataset {dataset!r}")
        return cls(**{**defaults[dataset], **overrides})

    def to_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return {f.name for f in fields(cls)}


class NoiseModel:
    """
    Gaussian perturbation of every weight after each update, with standard
    deviation ``sigma_noise_ratio * sigma_init``. A ratio of 0 draws nothing,
    so it behaves exactly like training without noise.

    Args:
        sigma_noise_ratio (:obj:`float`): Noise scale relative to the initial
            weight scale.
        seed (:obj:`int`): Trial seed; noise comes from its ``"noise"`` stream.
        layers (:obj:`tuple`): Matrices to perturb, ``"input"`` and/or
            ``"output"``.
    """

    def __init__(self, sigma_noise_ratio=0.0, seed=0, layers=("input", "output")):
        if not sigma_noise_ratio >= 0:
            raise ParameterError(
                f"sigma_noise_ratio must be non-negative, got {sigma_noise_ratio}"
            )
        unknown = set(layers) - set(MATRIX_NAMES.values())
        if unknown:
            raise ParameterError(f"unknown noise layers {sorted(unknown)}")
        self.sigma_noise_ratio = float(sigma_noise_ratio)
        self.seed = seed
        self.layers = tuple(layers)
        self._rng = None

    @property
    def enabled(self):
        return self.sigma_noise_ratio > 0 and bool(self.layers)

    def applies_to(self, weights):
        return self.enabled and weights.name in self.layers

    def draw(self, shape, sigma_init):
        """
        Draws one noise sample per weight from the seeded noise stream.
        """
        if self._rng is None:
            self._rng = make_rng(self.seed, "noise")
        return self._rng.normal(0.0, self.sigma_noise_ratio * sigma_init, size=shape)


def init_weights(spec, sigma_init, seed, sigma_out=0.01):
    """
    Initialises both weight matrices with the absolute values of Gaussian
    samples, signed by their source neuron.

    Args:
        spec (:obj:`py_ei_snn.models.NetworkSpec`): Network definition.
        sigma_init (:obj:`float`): Scale of the input-hidden weights.
        seed (:obj:`int` or :obj:`numpy.random.Generator`): Initialisation seed.
        sigma_out (:obj:`float`): Scale of the hidden-readout weights.

    Returns:
        ``(w_in, w_out)`` :obj:`WeightMatrix` objects.

    Examples:
        >>> from py_ei_snn.models import NetworkSpec
        >>> from py_ei_snn.training import init_weights
        >>> spec = NetworkSpec.from_ratio(4, 10, 2, (80, 20), horizon_steps=5)
        >>> w_in, w_out = init_weights(spec, 0.1, seed=0)
        >>> w_in.violations(), w_out.violations(), bool((w_out.values[8:] <= 0).all())
        (0, 0, True)
    """
    for name, value in (("sigma_init", sigma_init), ("sigma_out", sigma_out)):
        if not value > 0:
            raise ParameterError(f"{name} must be positive, got {value}")
    rng = np.random.default_rng(seed)
    in_mask = SignMask.excitatory(spec.n_input)
    hidden_mask = SignMask.from_partition(spec.is_excitatory)
    w_in = np.abs(rng.normal(0.0, sigma_init, size=(spec.n_input, spec.n_hidden)))
    w_out = np.abs(rng.normal(0.0, sigma_out, size=(spec.n_hidden, spec.n_output)))
    return (
        WeightMatrix(w_in, in_mask, INPUT_HIDDEN),
        WeightMatrix(w_out * hidden_mask.signs[:, np.newaxis], hidden_mask, HIDDEN_OUTPUT),
    )


def surrogate_grad(v, beta=10.0, threshold=1.0):
    """
    Pseudo-derivative of the spike with respect to the membrane voltage,
    :math:`e^{-\\beta |v - \\theta|}`. It peaks at 1 on the threshold.

    Examples:
        >>> from py_ei_snn.training import surrogate_grad
        >>> float(surrogate_grad(1.0))
        1.0
        >>> round(float(surrogate_grad(0.9)), 10)
        0.3678794412
    """
    if not beta > 0:
        raise ParameterError(f"surrogate beta must be positive, got {beta}")
    return np.exp(-beta * np.abs(np.asarray(v, dtype=np.float64) - threshold))


def _log_softmax(u):
    shifted = u - u.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def loss_per_step(readout_voltages, label):
    """
    Softmax cross-entropy of the readout voltages against ``label``,
    averaged over time steps.

    Args:
        readout_voltages (:obj:`numpy.ndarray`): ``(time, n_output)`` voltages.
        label (:obj:`int`): Target class.

    Examples:
        >>> import numpy as np
        >>> from py_ei_snn.training import loss_per_step
        >>> round(loss_per_step(np.zeros((5, 10)), 3), 6)
        2.302585
    """
    u = np.asarray(readout_voltages, dtype=np.float64)
    if u.ndim != 2:
        raise ShapeError(f"expected time x units readout, got shape {u.shape}")
    return batch_loss(u[np.newaxis], [label])


def batch_loss(readout_voltages, labels):
    """
    Mean over cases and time steps of the per-step softmax cross-entropy.
    """
    u = np.asarray(readout_voltages, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if u.ndim != 3 or labels.shape != (u.shape[0],):
        raise ShapeError(f"readout {u.shape} does not match {labels.size} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= u.shape[2]):
        raise ShapeError(f"labels must lie in [0, {u.shape[2]})")
    if not np.isfinite(u).all():
        raise NumericError("non-finite readout voltages")
    log_p = _log_softmax(u)
    return float(-log_p[np.arange(labels.size), :, labels].mean())


def _record_from_trace(trace):
    spikes = getattr(trace.hidden_spikes, "spikes", trace.hidden_spikes)
    return {
        "potentials": trace.hidden_potentials[np.newaxis],
        "spikes": np.asarray(spikes, dtype=np.float64)[np.newaxis],
        "readout_voltages": trace.readout_voltages[np.newaxis],
    }


def backward_bptt(trace, labels, weights, inputs, beta=10.0, params=None):
    """
    Gradients of :func:`batch_loss` with respect to both weight matrices.

    The adjoints of the readout (current, voltage) and hidden (current,
    integrated voltage) states are propagated backwards through the same
    recurrences as the forward pass. The hidden spike's derivative is
    :func:`surrogate_grad` of the integrated voltage, and the reset is
    treated as constant, so gradient flows from one step's voltage to the
    next as if no reset had occurred.

    Args:
        trace: The record returned by :func:`py_ei_snn.models.run_network`,
            or a single-case :obj:`py_ei_snn.models.SimulationTrace`.
        labels: Target class of every case (an :obj:`int` for a single case).
        weights (:obj:`tuple`): ``(w_in, w_out)`` used in the forward pass.
        inputs: Input spikes, ``(batch, time, n_input)`` (or one raster).
        beta (:obj:`float`): Surrogate sharpness.
        params (:obj:`py_ei_snn.models.NeuronParams`): Neuron parameters of
            the forward pass, defaults if omitted.

    Returns:
        ``(grad_in, grad_out)`` arrays shaped like the weight matrices.
    """
    params = params or NeuronParams()
    if isinstance(trace, dict):
        record = trace
    else:
        record = _record_from_trace(trace)
        labels = [labels]
        inputs = np.asarray(getattr(inputs, "spikes", inputs))[np.newaxis]

    w_in, w_out = (np.asarray(getattr(w, "values", w), dtype=np.float64) for w in weights)
    x = np.asarray(inputs, dtype=np.float64)
    s = record["spikes"]
    u = record["readout_voltages"]
    p = record["potentials"]
    labels = np.asarray(labels, dtype=np.int64)

    n_batch, n_steps, n_hidden = s.shape
    if x.shape[:2] != (n_batch, n_steps) or x.shape[2] != w_in.shape[0]:
        raise ShapeError(f"inputs {x.shape} do not match the trace {s.shape}")
    if w_in.shape[1] != n_hidden or w_out.shape != (n_hidden, u.shape[2]):
        raise ShapeError(
            f"weights {w_in.shape}, {w_out.shape} do not match the trace"
        )
    if labels.shape != (n_batch,):
        raise ShapeError(f"{labels.size} labels for a batch of {n_batch}")

    a_m = params.decay_mem
    a_s = params.decay_syn

    probs = np.exp(_log_softmax(u))
    probs[np.arange(n_batch), :, labels] -= 1.0
    grad_u = probs / (n_batch * n_steps)

    # Readout adjoints; grad_g[t] is the gradient of the weighted drive at t
    grad_g = np.zeros_like(u)
    lam_u = np.zeros((n_batch, u.shape[2]))
    lam_j = np.zeros_like(lam_u)
    for t in range(n_steps - 1, -1, -1):
        grad_g[:, t] = lam_j
        lam_u, lam_j = grad_u[:, t] + a_m * lam_u, lam_u + a_s * lam_j

    grad_out = np.tensordot(s, grad_g, axes=([0, 1], [0, 1]))
    grad_s = np.matmul(grad_g, w_out.T) * surrogate_grad(p, beta, params.threshold)

    grad_h = np.zeros_like(s)
    lam_v = np.zeros((n_batch, n_hidden))
    lam_i = np.zeros_like(lam_v)
    for t in range(n_steps - 1, -1, -1):
        grad_h[:, t] = lam_i
        lam_v, lam_i = grad_s[:, t] + a_m * lam_v, lam_v + a_s * lam_i

    grad_in = np.tensordot(x, grad_h, axes=([0, 1], [0, 1]))
    if not (np.isfinite(grad_in).all() and np.isfinite(grad_out).all()):
        raise NumericError("non-finite gradients")
    return grad_in, grad_out


class Adam:
    """
    Adam optimiser over a fixed list of parameter arrays.

    Args:
        shapes (:obj:`list`): Shape of every parameter.
        learning_rate (:obj:`float`): Step size.
        beta1 (:obj:`float`): First moment decay.
        beta2 (:obj:`float`): Second moment decay.
        eps (:obj:`float`): Denominator offset.
    """

    def __init__(self, shapes, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if not learning_rate > 0:
            raise ParameterError(f"learning_rate must be positive, got {learning_rate}")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros(shape) for shape in shapes]
        self.v = [np.zeros(shape) for shape in shapes]
        self.t = 0

    @classmethod
    def from_config(cls, shapes, cfg):
        return cls(shapes, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)

    def step(self, gradients):
        """
        Returns the update to add to each parameter.
        """
        if len(gradients) != len(self.m):
            raise ShapeError(f"{len(gradients)} gradients for {len(self.m)} parameters")
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        steps = []
        for k, g in enumerate(gradients):
            g = np.asarray(g, dtype=np.float64)
            if g.shape != self.m[k].shape:
                raise ShapeError(f"gradient {k} has shape {g.shape}, expected {self.m[k].shape}")
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            m_hat = self.m[k] / correction1
            v_hat = self.v[k] / correction2
            steps.append(-self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps))
        return steps


def apply_update(weights, gradients, optimizer, noise=None, sigma_init=None):
    """
    One optimisation step on a list of weight matrices: the Adam update, then
    the weight noise, then the sign clamp.

    Args:
        weights (:obj:`list`): :obj:`WeightMatrix` objects.
        gradients (:obj:`list`): Gradient of the loss for each matrix.
        optimizer (:obj:`Adam`): Optimiser holding the moment estimates.
        noise (:obj:`NoiseModel`): Optional weight noise.
        sigma_init (:obj:`float`): Initial weight scale the noise is relative
            to; required when noise is enabled.

    Returns:
        A :obj:`list` of new :obj:`WeightMatrix` objects satisfying their sign
        masks.
    """
    steps = optimizer.step(gradients)
    updated = []
    for w, step in zip(weights, steps):
        if not np.isfinite(step).all():
            raise NumericError(f"non-finite update of the {w.name} weights")
        values = w.values + step
        if noise is not None and noise.applies_to(w):
            if sigma_init is None:
                raise ParameterError("weight noise needs sigma_init")
            values = values + noise.draw(values.shape, sigma_init)
        updated.append(w.with_values(w.mask.clamp(values)))
    return updated


def save_weights(path, weights):
    """
    Writes weight matrices to a checkpoint. Each matrix is stored as the magic
    ``SNNWT001``, ``u32`` rows, ``u32`` cols, ``u8`` matrix id, the ``f64``
    values in row-major order and one ``i8`` sign per row, little-endian.
    """
    chunks = []
    for w in weights:
        rows, cols = w.shape
        chunks.append(_WEIGHTS_HEADER.pack(WEIGHTS_MAGIC, rows, cols, w.matrix_id))
        chunks.append(np.ascontiguousarray(w.values, dtype="<f8").tobytes())
        chunks.append(w.mask.signs.astype("<i1").tobytes())
    atomic_write(path, b"".join(chunks))


def load_weights(path):
    """
    Reads the matrices written by :func:`save_weights`, in file order.
    """
    data = read_binary(path)
    offset = 0
    weights = []
    while offset < len(data):
        if offset + _WEIGHTS_HEADER.size > len(data):
            raise FormatError(f"{path}: truncated weight header")
        magic, rows, cols, matrix_id = _WEIGHTS_HEADER.unpack_from(data, offset)
        if magic != WEIGHTS_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {WEIGHTS_MAGIC!r}")
        offset += _WEIGHTS_HEADER.size
        size = rows * cols * 8 + rows
        if offset + size > len(data):
            raise FormatError(f"{path}: truncated {rows}x{cols} weight matrix")
        values = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=offset)
        signs = np.frombuffer(data, dtype="<i1", count=rows, offset=offset + rows * cols * 8)
        offset += size
        try:
            weights.append(
                WeightMatrix(values.reshape(rows, cols).copy(), SignMask(signs), matrix_id)
            )
        except ParameterError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    if not weights:
        raise FormatError(f"{path}: no weight matrices")
    return weights


@dataclass
class PassResult:
    """
    Outputs of a forward pass over a dataset, in dataset order.
    """

    predictions: np.ndarray
    labels: np.ndarray
    loss: float
    spikes_excitatory: np.ndarray
    spikes_inhibitory: np.ndarray
    hidden_spikes: np.ndarray = None


def forward_pass(spec, weights, dataset, batch_size=256, keep_spikes=False):
    """
    Simulates every case of ``dataset`` and collects predictions, the loss and
    per-case hidden spike counts; ``keep_spikes`` also keeps the boolean
    hidden rasters.
    """
    if len(dataset) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    w_in, w_out = weights
    exc = spec.is_excitatory
    predictions, e_counts, i_counts, rasters = [], [], [], []
    loss_sum = 0.0
    for start in range(0, len(dataset), batch_size):
        idx = np.arange(start, min(start + batch_size, len(dataset)))
        record = run_network(spec, w_in, w_out, dataset.rasters(idx))
        labels = dataset.labels[idx]
        predictions.append(predict(record["readout_voltages"]))
        loss_sum += batch_loss(record["readout_voltages"], labels) * idx.size
        counts = record["spikes"].sum(axis=1)
        e_counts.append(counts[:, exc].sum(axis=1))
        i_counts.append(counts[:, ~exc].sum(axis=1))
        if keep_spikes:
            rasters.append(record["spikes"].astype(bool))
    return PassResult(
        predictions=np.concatenate(predictions),
        labels=np.asarray(dataset.labels),
        loss=loss_sum / len(dataset),
        spikes_excitatory=np.concatenate(e_counts),
        spikes_inhibitory=np.concatenate(i_counts),
        hidden_spikes=np.concatenate(rasters) if keep_spikes else None,
    )


def _accuracy(result, n_classes):
    correct = result.predictions == result.labels
    per_class = [
        float(correct[result.labels == c].mean()) if (result.labels == c).any() else None
        for c in range(n_classes)
    ]
    return float(correct.mean()), per_class


def evaluate(spec, weights, test_set, batch_size=256):
    """
    Classification accuracy of the network on ``test_set``.

    Returns:
        ``(accuracy, per_class)`` where ``per_class`` has one entry per readout
        unit, ``None`` for classes absent from the set.
    """
    return _accuracy(forward_pass(spec, weights, test_set, batch_size), spec.n_output)


def initial_rate_probe(spec, w_in, w_out, dataset, n_cases=256, seed=0, batch_size=256):
    """
    Mean firing frequency (Hz) per hidden neuron of the network on a seeded
    sample of ``dataset``. Used to check that a weight scale leaves the
    untrained network sparsely active.
    """
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, "probe")
    sample = dataset.sample(n_cases, rng)
    result = forward_pass(spec, (w_in, w_out), sample, batch_size)
    total = result.spikes_excitatory.sum() + result.spikes_inhibitory.sum()
    rate = metrics.firing_frequency(total / len(sample), spec.duration_ms, spec.n_hidden)
    logger.debug("probe on %d cases: %.4f Hz", len(sample), rate)
    return rate


def _analyse_hidden(spec, weights, cases, metric_cfg):
    result = forward_pass(spec, weights, cases, keep_spikes=True)
    exc = spec.is_excitatory
    dt = spec.neuron_params.dt
    binned = metrics.binned_activity(result.hidden_spikes, exc, metric_cfg.activity_bin_steps)
    return {
        "distances": metrics.mean_category_distances(
            result.hidden_spikes, exc, tau=metric_cfg.van_rossum_tau, dt=dt
        ),
        "isi": metrics.isi_summary(result.hidden_spikes, exc, dt),
        "activity": {
            "bin_steps": metric_cfg.activity_bin_steps,
            "excitatory": binned["excitatory"],
            "inhibitory": binned["inhibitory"],
        },
    }


def _epoch_record(spec, epoch, result, train_loss):
    accuracy, per_class = _accuracy(result, spec.n_output)
    activity = metrics.activity_from_counts(
        result.spikes_excitatory, result.spikes_inhibitory, result.labels, spec.n_output
    )
    return {
        "epoch": epoch,
        "train_loss": train_loss,
        "test_loss": result.loss,
        "accuracy": accuracy,
        "per_class_accuracy": per_class,
        "activity": activity.to_dict(),
    }


def train_run(
    spec,
    dataset,
    cfg,
    noise=None,
    test_set=None,
    metric_cfg=None,
    dataset_name="fashion-mnist",
    checkpoint_dir=None,
    check_signs=True,
):
    """
    Trains a network from a fresh seeded initialisation and records the run.

    The untrained network is probed for its firing rate and analysed (pair
    distances, ISIs, activity over time); the test set is evaluated after
    every epoch; weight statistics are kept at epochs 0, 1, 10 and the final
    epoch; the trained network is analysed again at the end.

    Args:
        spec (:obj:`py_ei_snn.models.NetworkSpec`): Network definition.
        dataset (:obj:`py_ei_snn.datasets.SpikeDataset`): Training set.
        cfg (:obj:`TrainConfig`): Optimisation settings and trial seed.
        noise (:obj:`NoiseModel`): Weight noise, none if omitted.
        test_set (:obj:`py_ei_snn.datasets.SpikeDataset`): Evaluation set,
            the training set if omitted.
        metric_cfg (:obj:`py_ei_snn.metrics.MetricConfig`): Analysis settings.
        dataset_name (:obj:`str`): Recorded in the manifest.
        checkpoint_dir (:obj:`str`): If given, the weights of every snapshot
            epoch are saved there as ``weights-epoch-NNN.bin``.
        check_signs (:obj:`bool`): Scan every update for sign violations and
            raise :obj:`py_ei_snn.utils.StateError` on any.

    Returns:
        ``(manifest, (w_in, w_out))``: the :obj:`RunManifest` and the final
        weights.
    """
    if len(dataset) == 0:
        raise DataError("training set is empty")
    if dataset.n_units != spec.n_input or dataset.horizon_steps != spec.horizon_steps:
        raise ShapeError(
            f"dataset provides {dataset.n_units} units x {dataset.horizon_steps} steps, "
            f"network expects {spec.n_input} x {spec.horizon_steps}"
        )
    test_set = test_set if test_set is not None else dataset
    metric_cfg = metric_cfg or metrics.MetricConfig()
    noise = noise or NoiseModel(0.0, cfg.seed)
    started = time.monotonic()

    weights = init_weights(spec, cfg.sigma_init, make_rng(cfg.seed, "init"), cfg.sigma_out)
    manifest = RunManifest(
        dataset=dataset_name,
        ei_ratio=[spec.n_excitatory, spec.n_inhibitory],
        sigma_init=cfg.sigma_init,
        sigma_noise_ratio=noise.sigma_noise_ratio,
        seed=cfg.seed,
        config={
            "train": cfg.to_dict(),
            "metrics": asdict(metric_cfg),
            "noise_layers": list(noise.layers),
            "network": asdict(spec),
        },
    )
    manifest.initial_rate_hz = initial_rate_probe(
        spec, *weights, dataset, metric_cfg.probe_cases, make_rng(cfg.seed, "probe")
    )
    logger.info(
        "E:I %d:%d sigma_init=%g noise=%g seed=%d: initial rate %.3f Hz",
        spec.n_excitatory, spec.n_inhibitory, cfg.sigma_init,
        noise.sigma_noise_ratio, cfg.seed, manifest.initial_rate_hz,
    )

    analysis_set = dataset if metric_cfg.distance_split == "train" else test_set
    analysis_set = analysis_set.sample(metric_cfg.distance_cases, make_rng(cfg.seed, "distance"))
    pre = _analyse_hidden(spec, weights, analysis_set, metric_cfg)

    snapshots = set(SNAPSHOT_EPOCHS) | {cfg.epochs}

    def snapshot(epoch):
        if epoch not in snapshots:
            return
        manifest.weight_stats[str(epoch)] = {
            w.name: metrics.weight_stats(
                w, metric_cfg.histogram_bins, metric_cfg.histogram_range
            )
            for w in weights
        }
        if checkpoint_dir is not None:
            save_weights(os.path.join(checkpoint_dir, f"weights-epoch-{epoch:03d}.bin"), weights)

    manifest.epochs.append(
        _epoch_record(spec, 0, forward_pass(spec, weights, test_set, cfg.batch_size), None)
    )
    snapshot(0)

    optimizer = Adam.from_config([w.shape for w in weights], cfg)
    shuffle_rng = make_rng(cfg.seed, "shuffle")
    params = spec.neuron_params
    for epoch in range(1, cfg.epochs + 1):
        losses = []
        for idx in make_batches(dataset, cfg.batch_size, shuffle_rng):
            x = dataset.rasters(idx)
            y = dataset.labels[idx]
            record = run_network(spec, *weights, x)
            loss = batch_loss(record["readout_voltages"], y)
            losses.append(loss * idx.size)
            grads = backward_bptt(record, y, weights, x, cfg.surrogate_beta, params)
            weights = apply_update(weights, grads, optimizer, noise, cfg.sigma_init)
            logger.debug("update %d: batch loss %.5f", optimizer.t, loss)
            if check_signs:
                violations = sum(w.violations() for w in weights)
                if violations:
                    manifest.sign_violations += violations
                    raise StateError(f"{violations} sign violations after update {optimizer.t}")

        record = _epoch_record(
            spec,
            epoch,
            forward_pass(spec, weights, test_set, cfg.batch_size),
            float(np.sum(losses) / len(dataset)),
        )
        manifest.epochs.append(record)
        snapshot(epoch)
        logger.info(
            "epoch %d/%d: train loss %.4f, test accuracy %.2f%%",
            epoch, cfg.epochs, record["train_loss"], 100 * record["accuracy"],
        )

    post = _analyse_hidden(spec, weights, analysis_set, metric_cfg)
    for key in ("distances", "isi", "activity"):
        setattr(manifest, key, {"pre": pre[key], "post": post[key]})
    manifest = RunManifest.from_dict(manifest.to_dict())
    if dataset_name in SUCCESS_THRESHOLDS:
        manifest.success = success_rule(manifest)
    manifest.wall_clock_seconds = time.monotonic() - started
    return manifest, weights
