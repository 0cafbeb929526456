import numpy as np
from pytest import approx, raises

from py_ei_snn import models
from py_ei_snn.utils import NumericError, ParameterError, ShapeError, StateError


def single_input_spec(n_hidden=1, n_output=1, horizon_steps=10):
    return models.NetworkSpec.from_ratio(
        1, n_hidden, n_output, (1, 0), horizon_steps=horizon_steps
    )


class TestDecayFactor(object):
    def test_membrane_and_synapse(self):
        assert models.decay_factor(10, 1) == approx(0.9048374180)
        assert models.decay_factor(5, 1) == approx(0.8187307531)

    def test_non_positive_tau(self):
        with raises(ParameterError):
            models.decay_factor(0, 1)
        with raises(ValueError):
            models.decay_factor(-5, 1)


class TestNeuronParams(object):
    def test_defaults(self):
        params = models.NeuronParams()
        assert params.decay_mem == approx(np.exp(-0.1))
        assert params.decay_syn == approx(np.exp(-0.2))

    def test_threshold_below_reset(self):
        with raises(ParameterError):
            models.NeuronParams(threshold=0.0, reset_potential=0.5)


class TestNetworkSpec(object):
    def test_presets(self):
        spec = models.NetworkSpec.shd((80, 20))
        assert (spec.n_input, spec.n_hidden, spec.n_output) == (700, 200, 20)
        assert (spec.n_excitatory, spec.n_inhibitory) == (160, 40)
        assert spec.horizon_steps == 200

    def test_partition(self):
        spec = models.NetworkSpec.fashion_mnist((50, 50))
        mask = spec.is_excitatory
        assert mask.sum() == 50
        assert mask[:50].all() and not mask[50:].any()

    def test_all_excitatory(self):
        spec = models.NetworkSpec.fashion_mnist((100, 0))
        assert spec.n_inhibitory == 0

    def test_inconsistent_partition(self):
        with raises(ParameterError):
            models.NetworkSpec(784, 100, 10, 80, 30, horizon_steps=100)

    def test_invalid_ratio(self):
        with raises(ParameterError):
            models.split_hidden(100, (0, 0))


class TestSpikeRaster(object):
    def test_binary_only(self):
        with raises(ParameterError):
            models.SpikeRaster(np.array([[0, 2]]))

    def test_shape(self):
        with raises(ShapeError):
            models.SpikeRaster(np.zeros(5))

    def test_count_and_equality(self):
        a = models.SpikeRaster(np.eye(3))
        b = models.SpikeRaster(np.eye(3, dtype=bool))
        assert a.count() == 3
        assert a == b
        assert a != models.SpikeRaster(np.zeros((3, 3)))


class TestStepLayer(object):
    def test_leak_without_input(self):
        i, v, s = models.step_layer([0.0], [0.5], [0], np.zeros((1, 1)))
        assert v[0] == approx(0.5 * np.exp(-0.1))
        assert s[0] == 0

    def test_spike_and_reset(self):
        i, v, s = models.step_layer([0.0], [1.2], [0], np.zeros((1, 1)))
        assert v[0] == 0.0
        assert s[0] == 1

    def test_threshold_is_strict(self):
        i, v, s = models.step_layer([1.0], [0.0], [0], np.zeros((1, 1)))
        assert v[0] == 1.0
        assert s[0] == 0

    def test_current_integrates_input(self):
        i, v, s = models.step_layer([0.5], [0.0], [1, 0], np.array([[0.3], [0.7]]))
        assert i[0] == approx(0.5 * np.exp(-0.2) + 0.3)
        # the voltage sees the current from before the update
        assert v[0] == approx(0.5)

    def test_shape_mismatch(self):
        with raises(ShapeError):
            models.step_layer([0.0, 0.0], [0.0, 0.0], [1], np.zeros((2, 2)))

    def test_non_finite_state(self):
        with raises(NumericError):
            models.step_layer([np.nan], [0.0], [0], np.zeros((1, 1)))


class TestSimulate(object):
    def test_silent_input(self):
        spec = models.NetworkSpec.from_ratio(3, 4, 2, (1, 1), horizon_steps=6)
        trace = models.simulate(
            spec, np.ones((3, 4)), np.ones((4, 2)), np.zeros((6, 3))
        )
        assert trace.hidden_spikes.count() == 0
        assert np.abs(trace.readout_voltages).sum() == 0

    def test_single_spike_propagation(self):
        spec = single_input_spec()
        spikes = np.zeros((10, 1))
        spikes[0, 0] = 1
        trace = models.simulate(spec, np.array([[0.4]]), np.ones((1, 1)), spikes)
        assert trace.hidden_currents[1, 0] == approx(0.4)
        assert trace.hidden_voltages[1, 0] == 0.0
        assert trace.hidden_voltages[2, 0] == approx(0.4)
        assert trace.hidden_currents[2, 0] == approx(0.4 * np.exp(-0.2))
        assert trace.hidden_spikes.count() == 0

    def test_saturation(self):
        spec = single_input_spec(n_hidden=3, horizon_steps=20)
        trace = models.simulate(
            spec, np.full((1, 3), 100.0), np.ones((3, 1)), np.ones((20, 1))
        )
        # the first spike can occur two steps after the first input
        assert trace.hidden_spikes.count() == 3 * 18
        assert not trace.hidden_spikes.spikes[:2].any()

    def test_readout_has_no_threshold(self):
        spec = single_input_spec(horizon_steps=30)
        trace = models.simulate(
            spec, np.array([[100.0]]), np.array([[5.0]]), np.ones((30, 1))
        )
        assert trace.readout_voltages.max() > spec.neuron_params.threshold

    def test_batch_matches_single(self):
        rng = np.random.default_rng(3)
        spec = models.NetworkSpec.from_ratio(6, 5, 3, (4, 1), horizon_steps=15)
        w_in = rng.uniform(0, 1, (6, 5))
        w_out = rng.normal(0, 1, (5, 3))
        inputs = rng.uniform(size=(4, 15, 6)) < 0.3
        record = models.run_network(spec, w_in, w_out, inputs)
        for k in range(4):
            trace = models.simulate(spec, w_in, w_out, inputs[k])
            assert record["readout_voltages"][k] == approx(trace.readout_voltages)

    def test_wrong_input_width(self):
        spec = models.NetworkSpec.from_ratio(3, 4, 2, (1, 1), horizon_steps=6)
        with raises(ShapeError):
            models.simulate(spec, np.ones((3, 4)), np.ones((4, 2)), np.zeros((6, 2)))

    def test_relaxed_model_has_no_reset(self):
        spec = single_input_spec(horizon_steps=20)
        record = models.run_network(
            spec, np.array([[2.0]]), np.ones((1, 1)), np.ones((1, 20, 1)), relaxed_beta=10.0
        )
        assert np.array_equal(record["potentials"], record["voltages"])
        assert record["spikes"].max() < 2.0 / 10.0


class TestRelaxedGate(object):
    def test_derivative_is_surrogate(self):
        layer = models.RelaxedLIFLayer(beta=10.0)
        v = np.array([0.3, 0.95, 1.0, 1.05, 1.7])
        h = 1e-6
        numeric = (layer.gate(v + h) - layer.gate(v - h)) / (2 * h)
        assert numeric == approx(np.exp(-10.0 * np.abs(v - 1.0)), rel=1e-5)

    def test_gate_is_continuous_at_threshold(self):
        layer = models.RelaxedLIFLayer(beta=4.0)
        assert layer.gate(np.array([1.0 - 1e-12]))[0] == approx(layer.gate(np.array([1.0]))[0])


class TestClassify(object):
    def test_highest_peak(self):
        voltages = np.array([[0.0, 0.1, 0.0], [0.2, 0.9, 0.3], [0.1, 0.0, 1.5]])
        assert models.classify(voltages) == 2

    def test_tie_goes_to_lowest_index(self):
        assert models.classify(np.array([[0.0, 2.0, 2.0], [1.0, 0.5, 0.0]])) == 1

    def test_empty(self):
        with raises(StateError):
            models.classify(np.zeros((0, 3)))
