import os

import numpy as np
from pytest import approx, raises

from py_ei_snn import training
from py_ei_snn.datasets import RasterDataset
from py_ei_snn.metrics import MetricConfig
from py_ei_snn.models import NetworkSpec, run_network, simulate
from py_ei_snn.utils import DataError, FormatError, NumericError, ParameterError, ShapeError


def gradient_fixture(w_scale, p_input, seed=11):
    rng = np.random.default_rng(seed)
    spec = NetworkSpec.from_ratio(8, 6, 3, (2, 1), horizon_steps=20)
    w_in = rng.uniform(0.0, w_scale, size=(8, 6))
    w_out = rng.normal(0.0, 0.5, size=(6, 3))
    inputs = rng.uniform(size=(10, 20, 8)) < p_input
    labels = rng.integers(0, 3, size=10)
    return spec, w_in, w_out, inputs, labels


def loss_of(spec, w_in, w_out, inputs, labels, relaxed_beta=None):
    record = run_network(spec, w_in, w_out, inputs, relaxed_beta=relaxed_beta)
    return training.batch_loss(record["readout_voltages"], labels)


def finite_difference(f, w, h=1e-5):
    grad = np.zeros_like(w)
    for idx in np.ndindex(*w.shape):
        plus, minus = w.copy(), w.copy()
        plus[idx] += h
        minus[idx] -= h
        grad[idx] = (f(plus) - f(minus)) / (2 * h)
    return grad


def relative_error(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def two_class_data(n=16, n_input=20, steps=40, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    rasters = np.zeros((n, steps, n_input), dtype=bool)
    half = n_input // 2
    for k, y in enumerate(labels):
        rasters[k, :, y * half : (y + 1) * half] = rng.uniform(size=(steps, half)) < 0.2
    return RasterDataset(rasters, labels)


def small_run(noise=None, epochs=2, checkpoint_dir=None, seed=4):
    data = two_class_data(n=24, steps=25)
    spec = NetworkSpec.from_ratio(20, 10, 2, (80, 20), horizon_steps=25)
    cfg = training.TrainConfig(
        learning_rate=1e-2, batch_size=8, epochs=epochs, sigma_init=0.1, seed=seed
    )
    metric_cfg = MetricConfig(distance_cases=8, probe_cases=8, histogram_bins=5)
    return training.train_run(
        spec, data, cfg, noise, metric_cfg=metric_cfg, checkpoint_dir=checkpoint_dir
    )


class TestSignMask(object):
    def test_clamp(self):
        mask = training.SignMask([1, -1, 1])
        values = np.array([[0.2, -0.1], [0.3, -0.4], [-0.5, 0.0]])
        clamped = mask.clamp(values)
        assert clamped.tolist() == [[0.2, 0.0], [0.0, -0.4], [0.0, 0.0]]
        assert mask.violations(values) == 3
        assert mask.violations(clamped) == 0

    def test_invalid_entries(self):
        with raises(ParameterError):
            training.SignMask([1, 0])

    def test_mask_must_match_rows(self):
        with raises(ShapeError):
            training.WeightMatrix(np.zeros((3, 2)), training.SignMask([1, 1]))


class TestInitWeights(object):
    def test_signs_follow_partition(self):
        spec = NetworkSpec.fashion_mnist((80, 20))
        w_in, w_out = training.init_weights(spec, 0.01, seed=0)
        assert (w_in.values >= 0).all()
        assert (w_out.values[:80] >= 0).all()
        assert (w_out.values[80:] <= 0).all()
        assert w_in.violations() == 0 and w_out.violations() == 0

    def test_scale(self):
        spec = NetworkSpec.fashion_mnist((80, 20))
        w_in, _ = training.init_weights(spec, 0.01, seed=0)
        # mean of a half-normal is sigma * sqrt(2 / pi)
        assert w_in.values.mean() == approx(0.01 * np.sqrt(2 / np.pi), rel=0.02)
        assert w_in.values.std() == approx(0.01 * np.sqrt(1 - 2 / np.pi), rel=0.02)

    def test_seeded(self):
        spec = NetworkSpec.from_ratio(5, 4, 2, (1, 1), horizon_steps=5)
        a = training.init_weights(spec, 0.1, seed=3)
        b = training.init_weights(spec, 0.1, seed=3)
        c = training.init_weights(spec, 0.1, seed=4)
        assert a[0] == b[0] and a[1] == b[1]
        assert not np.array_equal(a[0].values, c[0].values)

    def test_non_positive_sigma(self):
        spec = NetworkSpec.from_ratio(5, 4, 2, (1, 1), horizon_steps=5)
        with raises(ParameterError):
            training.init_weights(spec, 0.0, seed=0)


class TestSurrogate(object):
    def test_peak_and_symmetry(self):
        assert float(training.surrogate_grad(1.0)) == 1.0
        assert float(training.surrogate_grad(0.8)) == approx(float(training.surrogate_grad(1.2)))
        assert float(training.surrogate_grad(2.0)) == approx(np.exp(-10.0))

    def test_invalid_beta(self):
        with raises(ParameterError):
            training.surrogate_grad(1.0, beta=0.0)


class TestLoss(object):
    def test_uniform_readout(self):
        assert training.loss_per_step(np.zeros((7, 4)), 2) == approx(np.log(4))

    def test_confident_readout(self):
        u = np.zeros((3, 2))
        u[:, 1] = 50.0
        assert training.loss_per_step(u, 1) == approx(0.0, abs=1e-12)

    def test_non_finite(self):
        with raises(NumericError):
            training.loss_per_step(np.array([[np.nan, 0.0]]), 0)

    def test_label_out_of_range(self):
        with raises(ShapeError):
            training.batch_loss(np.zeros((1, 3, 2)), [2])


class TestBackward(object):
    def test_readout_gradient(self):
        spec, w_in, w_out, inputs, labels = gradient_fixture(0.6, 0.3)
        record = run_network(spec, w_in, w_out, inputs)
        assert record["spikes"].sum() > 0
        _, grad_out = training.backward_bptt(
            record, labels, (w_in, w_out), inputs, params=spec.neuron_params
        )
        numeric = finite_difference(
            lambda w: loss_of(spec, w_in, w, inputs, labels), w_out
        )
        assert relative_error(grad_out, numeric) < 1e-4

    def test_relaxed_hidden_gradient(self):
        beta = 10.0
        spec, w_in, w_out, inputs, labels = gradient_fixture(0.1, 0.1)
        record = run_network(spec, w_in, w_out, inputs, relaxed_beta=beta)
        grad_in, grad_out = training.backward_bptt(
            record, labels, (w_in, w_out), inputs, beta=beta, params=spec.neuron_params
        )
        numeric_in = finite_difference(
            lambda w: loss_of(spec, w, w_out, inputs, labels, beta), w_in
        )
        numeric_out = finite_difference(
            lambda w: loss_of(spec, w_in, w, inputs, labels, beta), w_out
        )
        assert relative_error(grad_in, numeric_in) < 1e-3
        assert relative_error(grad_out, numeric_out) < 1e-4

    def test_single_trace_matches_batch(self):
        spec, w_in, w_out, inputs, labels = gradient_fixture(0.6, 0.3)
        trace = simulate(spec, w_in, w_out, inputs[0])
        single = training.backward_bptt(trace, labels[0], (w_in, w_out), inputs[0])
        batch = training.backward_bptt(
            run_network(spec, w_in, w_out, inputs[:1]), labels[:1], (w_in, w_out), inputs[:1]
        )
        assert single[0] == approx(batch[0])
        assert single[1] == approx(batch[1])

    def test_mismatched_weights(self):
        spec, w_in, w_out, inputs, labels = gradient_fixture(0.6, 0.3)
        record = run_network(spec, w_in, w_out, inputs)
        with raises(ShapeError):
            training.backward_bptt(record, labels, (w_in, w_out[:, :2]), inputs)


class TestAdam(object):
    def test_first_step_has_learning_rate_magnitude(self):
        adam = training.Adam([(2, 2)], learning_rate=0.01)
        (step,) = adam.step([np.array([[3.0, -0.2], [1e-3, 0.0]])])
        assert step[0] == approx([-0.01, 0.01], rel=1e-4)
        assert step[1, 0] == approx(-0.01, rel=1e-3)
        assert step[1, 1] == 0.0

    def test_shape_mismatch(self):
        adam = training.Adam([(2, 2)])
        with raises(ShapeError):
            adam.step([np.zeros((3, 2))])


class TestApplyUpdate(object):
    def test_clamp_after_update(self):
        w_exc = training.WeightMatrix(np.array([[0.001, 0.5]]), training.SignMask([1]))
        w_inh = training.WeightMatrix(
            np.array([[-0.001]]), training.SignMask([-1]), training.HIDDEN_OUTPUT
        )
        adam = training.Adam([w_exc.shape, w_inh.shape], learning_rate=0.01)
        new_exc, new_inh = training.apply_update(
            [w_exc, w_inh], [np.ones((1, 2)), -np.ones((1, 1))], adam
        )
        assert new_exc.values[0] == approx([0.0, 0.49], abs=1e-6)
        assert new_inh.values[0, 0] == 0.0
        assert new_exc.violations() == 0 and new_inh.violations() == 0

    def test_zero_noise_is_no_noise(self):
        spec = NetworkSpec.from_ratio(4, 6, 2, (80, 20), horizon_steps=5)
        grads = [np.full((4, 6), 0.3), np.full((6, 2), -0.2)]
        results = []
        for noise in (None, training.NoiseModel(0.0, seed=3)):
            weights = training.init_weights(spec, 0.1, seed=0)
            adam = training.Adam([w.shape for w in weights])
            for _ in range(5):
                weights = training.apply_update(weights, grads, adam, noise, 0.1)
            results.append(weights)
        assert all(np.array_equal(a.values, b.values) for a, b in zip(*results))

    def test_update_noise_scale(self):
        # Zero gradients leave only the noise; weights far from 0 are not clamped
        w = training.WeightMatrix(np.ones((300, 200)), training.SignMask(np.ones(300)))
        adam = training.Adam([w.shape])
        noise = training.NoiseModel(0.5, seed=2, layers=("input",))
        (noisy,) = training.apply_update([w], [np.zeros(w.shape)], adam, noise, 0.02)
        delta = noisy.values - 1.0
        assert delta.mean() == approx(0.0, abs=2e-4)
        assert delta.std() == approx(0.5 * 0.02, rel=0.02)

    def test_noise_only_on_selected_layers(self):
        spec = NetworkSpec.from_ratio(4, 6, 2, (100, 0), horizon_steps=5)
        weights = [w.with_values(w.values + 1.0) for w in training.init_weights(spec, 0.1, 0)]
        adam = training.Adam([w.shape for w in weights])
        zero = [np.zeros(w.shape) for w in weights]
        noise = training.NoiseModel(0.5, seed=1, layers=("output",))
        new = training.apply_update(weights, zero, adam, noise, 0.1)
        assert np.array_equal(new[0].values, weights[0].values)
        assert not np.array_equal(new[1].values, weights[1].values)

    def test_noise_scale(self):
        noise = training.NoiseModel(0.4, seed=2)
        draws = noise.draw((300, 300), sigma_init=0.01)
        assert draws.std() == approx(0.004, rel=0.02)
        assert draws.mean() == approx(0.0, abs=1e-4)

    def test_noise_needs_sigma_init(self):
        spec = NetworkSpec.from_ratio(4, 6, 2, (100, 0), horizon_steps=5)
        weights = training.init_weights(spec, 0.1, 0)
        adam = training.Adam([w.shape for w in weights])
        with raises(ParameterError):
            training.apply_update(
                weights, [np.zeros(w.shape) for w in weights], adam, training.NoiseModel(0.2)
            )

    def test_negative_noise_ratio(self):
        with raises(ParameterError):
            training.NoiseModel(-0.1)


class TestOverfit(object):
    def test_loss_halves_on_two_classes(self):
        data = two_class_data()
        spec = NetworkSpec.from_ratio(20, 30, 2, (80, 20), horizon_steps=40)
        weights = training.init_weights(spec, 0.1, seed=0)
        adam = training.Adam([w.shape for w in weights], learning_rate=1e-2)
        x = data.rasters(np.arange(len(data)))
        y = data.labels
        losses = []
        for _ in range(200):
            record = run_network(spec, *weights, x)
            losses.append(training.batch_loss(record["readout_voltages"], y))
            grads = training.backward_bptt(record, y, weights, x, 10.0, spec.neuron_params)
            weights = training.apply_update(weights, grads, adam)
        assert losses[-1] < 0.5 * losses[0]
        assert sum(w.violations() for w in weights) == 0


class TestCheckpoints(object):
    def test_layout_and_reload(self, tmp_path):
        spec = NetworkSpec.from_ratio(3, 4, 2, (3, 1), horizon_steps=5)
        weights = training.init_weights(spec, 0.1, seed=0)
        path = str(tmp_path / "weights.bin")
        training.save_weights(path, weights)
        assert os.path.getsize(path) == 2 * 17 + 8 * (12 + 8) + (3 + 4)
        with open(path, "rb") as f:
            assert f.read(8) == b"SNNWT001"
        loaded = training.load_weights(path)
        assert loaded[0] == weights[0] and loaded[1] == weights[1]
        assert loaded[1].mask.signs.tolist() == [1, 1, 1, -1]

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"SNNWT002" + bytes(9))
        with raises(FormatError):
            training.load_weights(str(path))

    def test_truncated(self, tmp_path):
        spec = NetworkSpec.from_ratio(3, 4, 2, (3, 1), horizon_steps=5)
        path = str(tmp_path / "weights.bin")
        training.save_weights(path, training.init_weights(spec, 0.1, seed=0))
        with open(path, "rb") as f:
            data = f.read()
        with open(path, "wb") as f:
            f.write(data[:-3])
        with raises(FormatError):
            training.load_weights(path)


class TestEvaluate(object):
    def oracle(self):
        spec = NetworkSpec.from_ratio(2, 2, 2, (1, 0), horizon_steps=10)
        rasters = np.zeros((2, 10, 2), dtype=bool)
        rasters[0, :, 0] = True
        rasters[1, :, 1] = True
        return spec, RasterDataset(rasters, [0, 1])

    def test_perfect_weights(self):
        spec, data = self.oracle()
        accuracy, per_class = training.evaluate(spec, (2 * np.eye(2), np.eye(2)), data)
        assert accuracy == 1.0
        assert per_class == [1.0, 1.0]

    def test_absent_class(self):
        spec, data = self.oracle()
        accuracy, per_class = training.evaluate(
            spec, (2 * np.eye(2), np.eye(2)), data.subset([0])
        )
        assert per_class == [1.0, None]

    def test_empty_set(self):
        spec, data = self.oracle()
        with raises(DataError):
            training.evaluate(spec, (np.eye(2), np.eye(2)), data.subset([]))


class TestInitialRateProbe(object):
    def test_zero_weights(self):
        data = two_class_data(steps=50)
        spec = NetworkSpec.from_ratio(20, 10, 2, (80, 20), horizon_steps=50)
        rate = training.initial_rate_probe(spec, np.zeros((20, 10)), np.zeros((10, 2)), data)
        assert rate == 0.0

    def test_saturation(self):
        steps = 50
        data = RasterDataset(np.ones((4, steps, 3), dtype=bool), [0, 1, 0, 1])
        spec = NetworkSpec.from_ratio(3, 5, 2, (80, 20), horizon_steps=steps)
        rate = training.initial_rate_probe(spec, np.full((3, 5), 50.0), np.zeros((5, 2)), data)
        assert rate == approx(1000.0 * (steps - 2) / steps)
        assert rate <= 1000.0

    def test_deterministic(self):
        data = two_class_data(n=40, steps=30)
        spec = NetworkSpec.from_ratio(20, 10, 2, (80, 20), horizon_steps=30)
        w_in, w_out = training.init_weights(spec, 0.1, seed=1)
        a = training.initial_rate_probe(spec, w_in, w_out, data, n_cases=10, seed=7)
        b = training.initial_rate_probe(spec, w_in, w_out, data, n_cases=10, seed=7)
        assert a == b


class TestTrainRun(object):
    def test_manifest_contents(self):
        manifest, weights = small_run()
        assert [e["epoch"] for e in manifest.epochs] == [0, 1, 2]
        assert manifest.epochs[0]["train_loss"] is None
        assert len(manifest.epochs[1]["per_class_accuracy"]) == 2
        assert set(manifest.weight_stats) == {"0", "1", "2"}
        assert set(manifest.weight_stats["2"]) == {"input", "output"}
        assert set(manifest.distances) == {"pre", "post"}
        assert set(manifest.distances["post"]) == {"E-E", "E-I", "I-I"}
        assert manifest.initial_rate_hz >= 0
        assert manifest.sign_violations == 0
        assert manifest.success in (True, False)
        assert manifest.ei_ratio == [8, 2]

    def test_zero_epochs(self):
        manifest, _ = small_run(epochs=0)
        assert [e["epoch"] for e in manifest.epochs] == [0]
        assert manifest.success is False
        assert manifest.peak_accuracy is None
        assert set(manifest.weight_stats) == {"0"}
        assert manifest.distances["pre"] == manifest.distances["post"]

    def test_reproducible(self):
        first, w1 = small_run()
        second, w2 = small_run()
        assert first.comparable() == second.comparable()
        assert w1[0] == w2[0] and w1[1] == w2[1]

    def test_zero_noise_matches_no_noise(self):
        plain, w1 = small_run()
        zero, w2 = small_run(noise=training.NoiseModel(0.0, seed=4))
        assert plain.comparable() == zero.comparable()
        assert w1[0] == w2[0] and w1[1] == w2[1]

    def test_noisy_updates_keep_signs(self):
        manifest, weights = small_run(noise=training.NoiseModel(0.4, seed=4), epochs=3)
        assert manifest.sign_violations == 0
        assert all(w.violations() == 0 for w in weights)
        assert manifest.sigma_noise_ratio == 0.4

    def test_checkpoints(self, tmp_path):
        small_run(checkpoint_dir=str(tmp_path))
        names = sorted(os.listdir(tmp_path))
        assert names == [
            "weights-epoch-000.bin",
            "weights-epoch-001.bin",
            "weights-epoch-002.bin",
        ]
        assert len(training.load_weights(str(tmp_path / names[0]))) == 2

    def test_dataset_shape_mismatch(self):
        spec = NetworkSpec.from_ratio(21, 10, 2, (80, 20), horizon_steps=25)
        with raises(ShapeError):
            training.train_run(spec, two_class_data(steps=25), training.TrainConfig(epochs=1))
