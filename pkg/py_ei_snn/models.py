"""
This module implements the clock-driven simulation of the three layer spiking
network: an input layer of spike generators, a hidden layer of leaky
integrate-and-fire (LIF) neurons and a readout layer of leaky integrators.

Every layer shares the same synaptic current and membrane recurrences:

.. math::

    I[t+1] &= e^{-dt/\\tau_{syn}} I[t] + \\sum_i W_i S_i[t] \\\\
    V[t+1] &= e^{-dt/\\tau_{mem}} V[t] + I[t]

and differs only in how it fires. Row ``t`` of every recorded array holds the
state at time step ``t``; row 0 is the resting state.
"""

import logging
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from py_ei_snn.utils import NumericError, ParameterError, ShapeError, StateError

logger = logging.getLogger(__name__)


def decay_factor(tau, dt):
    """
    Returns the per-step decay factor :math:`e^{-dt/\\tau}` of an exponential
    process discretised with forward Euler.

    Args:
        tau (:obj:`float`): Time constant in ms.
        dt (:obj:`float`): Time step in ms.

    Returns:
        A :obj:`float` strictly between 0 and 1.

    Examples:
        >>> from py_ei_snn.models import decay_factor
        >>> round(decay_factor(tau=10, dt=1), 10)
        0.904837418
        >>> round(decay_factor(tau=5, dt=1), 10)
        0.8187307531
    """
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    return float(np.exp(-dt / tau))


@dataclass(frozen=True)
class NeuronParams:
    """
    Time constants, threshold and step size shared by the hidden and readout
    layers. Voltages are dimensionless; the threshold of 1 is nominally 1 mV.
    """

    tau_mem: float = 10.0
    tau_syn: float = 5.0
    threshold: float = 1.0
    reset_potential: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        for name in ("tau_mem", "tau_syn", "dt"):
            value = getattr(self, name)
            if not value > 0:
                raise ParameterError(f"{name} must be positive, got {value}")
        if not self.threshold > self.reset_potential:
            raise ParameterError(
                f"threshold ({self.threshold}) must exceed reset_potential "
                f"({self.reset_potential})"
            )

    @property
    def decay_mem(self):
        return decay_factor(self.tau_mem, self.dt)

    @property
    def decay_syn(self):
        return decay_factor(self.tau_syn, self.dt)


def split_hidden(n_hidden, ei_ratio):
    """
    Splits ``n_hidden`` units into excitatory and inhibitory counts following
    ``ei_ratio``.

    Args:
        n_hidden (:obj:`int`): Hidden layer size.
        ei_ratio (:obj:`tuple`): Relative sizes ``(E, I)``, e.g. ``(80, 20)``.

    Examples:
        >>> from py_ei_snn.models import split_hidden
        >>> split_hidden(100, (80, 20))
        (80, 20)
        >>> split_hidden(200, (95, 5))
        (190, 10)
    """
    e, i = ei_ratio
    if e < 0 or i < 0 or e + i <= 0:
        raise ParameterError(f"invalid E:I ratio {ei_ratio}")
    n_excitatory = int(round(n_hidden * e / (e + i)))
    return n_excitatory, n_hidden - n_excitatory


@dataclass(frozen=True)
class NetworkSpec:
    """
    Layer sizes, hidden-layer E:I partition and simulation horizon. The first
    ``n_excitatory`` hidden units are excitatory, the rest inhibitory.
    """

    n_input: int
    n_hidden: int
    n_output: int
    n_excitatory: int
    n_inhibitory: int
    horizon_steps: int
    neuron_params: NeuronParams = field(default_factory=NeuronParams)

    def __post_init__(self):
        for name in ("n_input", "n_hidden", "n_output", "horizon_steps"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be at least 1")
        if self.n_excitatory < 0 or self.n_inhibitory < 0:
            raise ParameterError("population sizes must be non-negative")
        if self.n_excitatory + self.n_inhibitory != self.n_hidden:
            raise ParameterError(
                f"n_excitatory + n_inhibitory ({self.n_excitatory} + "
                f"{self.n_inhibitory}) must equal n_hidden ({self.n_hidden})"
            )

    @classmethod
    def from_ratio(
        cls, n_input, n_hidden, n_output, ei_ratio, horizon_steps, neuron_params=None
    ):
        n_excitatory, n_inhibitory = split_hidden(n_hidden, ei_ratio)
        return cls(
            n_input=n_input,
            n_hidden=n_hidden,
            n_output=n_output,
            n_excitatory=n_excitatory,
            n_inhibitory=n_inhibitory,
            horizon_steps=horizon_steps,
            neuron_params=neuron_params or NeuronParams(),
        )

    @classmethod
    def fashion_mnist(cls, ei_ratio=(80, 20)):
        """
        784-100-10 network simulated for 100 steps of 1 ms.

        Examples:
            >>> from py_ei_snn.models import NetworkSpec
            >>> spec = NetworkSpec.fashion_mnist((80, 20))
            >>> spec.n_input, spec.n_hidden, spec.n_output, spec.n_inhibitory
            (784, 100, 10, 20)
        """
        return cls.from_ratio(784, 100, 10, ei_ratio, horizon_steps=100)

    @classmethod
    def shd(cls, ei_ratio=(80, 20)):
        """
        700-200-20 network simulated for 200 steps of 1 ms.
        """
        return cls.from_ratio(700, 200, 20, ei_ratio, horizon_steps=200)

    @property
    def is_excitatory(self):
        """
        Boolean mask over hidden units, ``True`` for excitatory units.
        """
        mask = np.zeros(self.n_hidden, dtype=bool)
        mask[: self.n_excitatory] = True
        return mask

    @property
    def duration_ms(self):
        return self.horizon_steps * self.neuron_params.dt


class SpikeRaster:
    """
    Binary spike matrix of shape ``(horizon_steps, n_units)`` for one case.
    """

    def __init__(self, spikes, dt=1.0):
        spikes = np.asarray(spikes)
        if spikes.ndim != 2:
            raise ShapeError(f"raster must be 2-D (time x units), got {spikes.shape}")
        if spikes.dtype != bool:
            if not np.isin(spikes, (0, 1)).all():
                raise ParameterError("raster entries must be 0 or 1")
            spikes = spikes.astype(bool)
        if not dt > 0:
            raise ParameterError(f"dt must be positive, got {dt}")
        self.spikes = spikes
        self.dt = float(dt)

    @property
    def horizon_steps(self):
        return self.spikes.shape[0]

    @property
    def n_units(self):
        return self.spikes.shape[1]

    def count(self):
        return int(self.spikes.sum())

    def __eq__(self, other):
        if not isinstance(other, SpikeRaster):
            return NotImplemented
        return self.dt == other.dt and np.array_equal(self.spikes, other.spikes)

    def __repr__(self):
        return (
            f"SpikeRaster(steps={self.horizon_steps}, units={self.n_units}, "
            f"spikes={self.count()}, dt={self.dt})"
        )


@dataclass
class SimulationTrace:
    """
    Per-step state of one simulated case.

    ``hidden_voltages`` holds the membrane voltage after the reset of the step,
    ``hidden_potentials`` the integrated voltage the threshold was tested on
    (they differ only where a spike was emitted).
    """

    hidden_currents: np.ndarray
    hidden_voltages: np.ndarray
    hidden_spikes: SpikeRaster
    readout_voltages: np.ndarray
    hidden_potentials: np.ndarray = None
    readout_currents: np.ndarray = None


class NeuronLayer(metaclass=ABCMeta):
    """
    Abstract base class for a population of neurons driven by weighted spikes.
    Subclasses decide how (and whether) the integrated voltage produces spikes.
    """

    def __init__(self, params=None):
        """
        Args:
            params (:obj:`NeuronParams`): Time constants and threshold. Decay
                factors are computed once here.
        """
        self.params = params or NeuronParams()
        self.decay_mem = self.params.decay_mem
        self.decay_syn = self.params.decay_syn

    @abstractmethod
    def fire(self, potential):
        """
        Returns:
            ``(spikes, voltage)``: the emitted spikes and the voltage carried to
            the next step, given the integrated ``potential``.
        """

    def step(self, current, voltage, drive):
        """
        Advances one time step.

        Args:
            current (:obj:`numpy.ndarray`): Synaptic current :math:`I[t]`.
            voltage (:obj:`numpy.ndarray`): Membrane voltage :math:`V[t]`.
            drive (:obj:`numpy.ndarray`): Weighted input :math:`W^T S[t]`.

        Returns:
            ``(current', potential, voltage', spikes)``
        """
        new_current = self.decay_syn * current + drive
        # V[t+1] integrates the pre-update current I[t]
        potential = self.decay_mem * voltage + current
        spikes, new_voltage = self.fire(potential)
        return new_current, potential, new_voltage, spikes

    def run(self, drive):
        """
        Simulates the layer over a whole horizon.

        Row 0 holds the rest state, and input reaches the voltage one step
        after it reaches the current, so the earliest spike is at row 2 and a
        saturated neuron fires at most ``T - 2`` times in ``T`` steps. The
        firing rate of such a neuron is ``1000 * (T - 2) / (T * dt)`` Hz, for
        example 980 Hz over 100 steps of 1 ms.

        Args:
            drive (:obj:`numpy.ndarray`): Weighted input of shape
                ``(batch, time, units)``; ``drive[:, t]`` enters the current at
                step ``t + 1``.

        Returns:
            A :obj:`dict` of ``(batch, time, units)`` arrays: ``currents``,
            ``potentials``, ``voltages`` and ``spikes``.
        """
        drive = np.asarray(drive, dtype=np.float64)
        n_batch, n_steps, n_units = drive.shape
        record = {
            name: np.zeros((n_batch, n_steps, n_units))
            for name in ("currents", "potentials", "voltages", "spikes")
        }
        current = np.zeros((n_batch, n_units))
        voltage = np.zeros((n_batch, n_units))
        for t in range(n_steps - 1):
            current, potential, voltage, spikes = self.step(
                current, voltage, drive[:, t]
            )
            record["currents"][:, t + 1] = current
            record["potentials"][:, t + 1] = potential
            record["voltages"][:, t + 1] = voltage
            record["spikes"][:, t + 1] = spikes
        return record


class LIFLayer(NeuronLayer):
    """
    Leaky integrate-and-fire neurons. A unit whose integrated voltage strictly
    exceeds the threshold emits a spike and its voltage is replaced by the
    reset potential.
    """

    def fire(self, potential):
        spikes = potential > self.params.threshold
        voltage = np.where(spikes, self.params.reset_potential, potential)
        return spikes.astype(np.float64), voltage


class LeakyIntegratorLayer(NeuronLayer):
    """
    Readout neurons: the LIF recurrences without threshold or reset. Voltages
    may exceed the threshold freely.
    """

    def fire(self, potential):
        return np.zeros_like(potential), potential


class RelaxedLIFLayer(NeuronLayer):
    """
    LIF neurons with the spike replaced by a smooth gate and no reset. The
    gate's derivative is exactly the surrogate gradient
    :math:`e^{-\\beta |v - \\theta|}`, so gradients of this model are the
    surrogate gradients of :obj:`LIFLayer` with the reset detached. Used to
    check the backward pass against finite differences.
    """

    def __init__(self, params=None, beta=10.0):
        super().__init__(params)
        if not beta > 0:
            raise ParameterError(f"beta must be positive, got {beta}")
        self.beta = beta

    def gate(self, potential):
        x = potential - self.params.threshold
        below = np.exp(self.beta * np.minimum(x, 0.0)) / self.beta
        above = (2.0 - np.exp(-self.beta * np.maximum(x, 0.0))) / self.beta
        return np.where(x < 0, below, above)

    def fire(self, potential):
        return self.gate(potential), potential


def _matrix(weights):
    # Accepts a WeightMatrix (anything with ``values``) or a plain array
    return np.asarray(getattr(weights, "values", weights), dtype=np.float64)


def _check_finite(*arrays):
    for array in arrays:
        if not np.isfinite(array).all():
            raise NumericError("non-finite values in network state or weights")


def step_layer(current, voltage, prev_spikes_in, weights, params=None):
    """
    Advances a hidden LIF layer by one step.

    The current is updated from the incoming spikes and the voltage integrates
    the pre-update current. Units whose new voltage strictly exceeds the
    threshold spike and are reset.

    Args:
        current (:obj:`numpy.ndarray`): Synaptic currents, one per target unit.
        voltage (:obj:`numpy.ndarray`): Membrane voltages, one per target unit.
        prev_spikes_in (:obj:`numpy.ndarray`): Binary spikes of the source layer.
        weights: :obj:`py_ei_snn.training.WeightMatrix` or array of shape
            ``(sources, targets)``.
        params (:obj:`NeuronParams`): Neuron parameters, defaults if omitted.

    Returns:
        ``(current', voltage', spikes_out)``

    Examples:
        >>> import numpy as np
        >>> from py_ei_snn.models import step_layer
        >>> i, v, s = step_layer([0.0], [0.5], [0], np.zeros((1, 1)))
        >>> round(float(v[0]), 10)
        0.452418709
        >>> i, v, s = step_layer([0.0], [1.2], [0], np.zeros((1, 1)))
        >>> float(v[0]), int(s[0])
        (0.0, 1)
    """
    w = _matrix(weights)
    current = np.asarray(current, dtype=np.float64)
    voltage = np.asarray(voltage, dtype=np.float64)
    spikes_in = np.asarray(prev_spikes_in, dtype=np.float64)
    if w.ndim != 2:
        raise ShapeError(f"weights must be 2-D, got shape {w.shape}")
    if spikes_in.shape != (w.shape[0],):
        raise ShapeError(
            f"input spikes have shape {spikes_in.shape}, weights expect "
            f"({w.shape[0]},)"
        )
    if current.shape != (w.shape[1],) or voltage.shape != (w.shape[1],):
        raise ShapeError(
            f"state shapes {current.shape}, {voltage.shape} do not match "
            f"{w.shape[1]} target units"
        )
    if not np.isin(spikes_in, (0, 1)).all():
        raise ParameterError("input spikes must be 0 or 1")
    _check_finite(current, voltage, w)

    layer = LIFLayer(params)
    new_current, _, new_voltage, spikes = layer.step(current, voltage, spikes_in @ w)
    return new_current, new_voltage, spikes.astype(np.uint8)


def run_network(spec, w_in, w_out, inputs, relaxed_beta=None):
    """
    Simulates a batch of cases through the hidden and readout layers.

    Args:
        spec (:obj:`NetworkSpec`): Network definition.
        w_in: Input to hidden weights, shape ``(n_input, n_hidden)``.
        w_out: Hidden to readout weights, shape ``(n_hidden, n_output)``.
        inputs (:obj:`numpy.ndarray`): Input spikes of shape
            ``(batch, horizon_steps, n_input)``.
        relaxed_beta (:obj:`float`): If given, the hidden layer is a
            :obj:`RelaxedLIFLayer` with this sharpness.

    Returns:
        A :obj:`dict` with the hidden layer record (``currents``,
        ``potentials``, ``voltages``, ``spikes``) and ``readout_currents``,
        ``readout_voltages``, all with a leading batch axis.
    """
    w_in = _matrix(w_in)
    w_out = _matrix(w_out)
    inputs = np.asarray(inputs)
    if w_in.shape != (spec.n_input, spec.n_hidden):
        raise ShapeError(
            f"w_in has shape {w_in.shape}, expected {(spec.n_input, spec.n_hidden)}"
        )
    if w_out.shape != (spec.n_hidden, spec.n_output):
        raise ShapeError(
            f"w_out has shape {w_out.shape}, expected "
            f"{(spec.n_hidden, spec.n_output)}"
        )
    if inputs.ndim != 3 or inputs.shape[1:] != (spec.horizon_steps, spec.n_input):
        raise ShapeError(
            f"inputs have shape {inputs.shape}, expected (batch, "
            f"{spec.horizon_steps}, {spec.n_input})"
        )
    _check_finite(w_in, w_out)

    params = spec.neuron_params
    if relaxed_beta is None:
        hidden = LIFLayer(params)
    else:
        hidden = RelaxedLIFLayer(params, beta=relaxed_beta)
    readout = LeakyIntegratorLayer(params)

    record = hidden.run(np.matmul(inputs.astype(np.float64), w_in))
    out = readout.run(np.matmul(record["spikes"], w_out))
    record["readout_currents"] = out["currents"]
    record["readout_voltages"] = out["voltages"]
    _check_finite(record["voltages"], record["readout_voltages"])
    return record


def simulate(spec, w_in, w_out, input_raster, relaxed_beta=None):
    """
    Simulates one case and returns its full :obj:`SimulationTrace`.

    Args:
        spec (:obj:`NetworkSpec`): Network definition.
        w_in: Input to hidden weights.
        w_out: Hidden to readout weights.
        input_raster (:obj:`SpikeRaster`): ``horizon_steps x n_input`` input.
        relaxed_beta (:obj:`float`): See :func:`run_network`.

    Examples:
        A silent input leaves every state at zero.

        >>> import numpy as np
        >>> from py_ei_snn.models import NetworkSpec, SpikeRaster, simulate
        >>> spec = NetworkSpec.from_ratio(3, 4, 2, (1, 1), horizon_steps=5)
        >>> trace = simulate(spec, np.ones((3, 4)), np.ones((4, 2)),
        ...                  SpikeRaster(np.zeros((5, 3))))
        >>> float(np.abs(trace.readout_voltages).sum())
        0.0
    """
    if not isinstance(input_raster, SpikeRaster):
        input_raster = SpikeRaster(input_raster, dt=spec.neuron_params.dt)
    record = run_network(
        spec, w_in, w_out, input_raster.spikes[np.newaxis], relaxed_beta=relaxed_beta
    )
    hidden_spikes = record["spikes"][0]
    if relaxed_beta is None:
        hidden_spikes = SpikeRaster(hidden_spikes.astype(bool), dt=input_raster.dt)
    return SimulationTrace(
        hidden_currents=record["currents"][0],
        hidden_voltages=record["voltages"][0],
        hidden_spikes=hidden_spikes,
        readout_voltages=record["readout_voltages"][0],
        hidden_potentials=record["potentials"][0],
        readout_currents=record["readout_currents"][0],
    )


def predict(readout_voltages):
    """
    Vectorised decision rule: for each case, the readout unit with the highest
    voltage at any time step. Ties go to the lowest index.

    Args:
        readout_voltages (:obj:`numpy.ndarray`): ``(batch, time, n_output)``.

    Returns:
        An integer array of class indices, one per case.
    """
    readout_voltages = np.asarray(readout_voltages)
    if readout_voltages.ndim != 3 or 0 in readout_voltages.shape[1:]:
        raise StateError("readout voltages are empty")
    return np.argmax(readout_voltages.max(axis=1), axis=1)


def classify(trace):
    """
    Returns the class chosen by the network for one case: the readout unit
    whose voltage trace reaches the highest value. Ties go to the lowest index.

    Args:
        trace (:obj:`SimulationTrace` or :obj:`numpy.ndarray`): A trace, or its
            ``time x n_output`` readout voltages.

    Examples:
        >>> import numpy as np
        >>> from py_ei_snn.models import classify
        >>> classify(np.array([[0.0, 2.0, 2.0], [1.0, 0.5, 0.0]]))
        1
    """
    voltages = getattr(trace, "readout_voltages", trace)
    if voltages is None:
        raise StateError("trace has no readout voltages")
    voltages = np.asarray(voltages)
    if voltages.ndim != 2:
        raise StateError(f"expected time x units readout, got shape {voltages.shape}")
    return int(predict(voltages[np.newaxis])[0])
