import json

import numpy as np
import pytest

from nnet.autoencoder import CAEModel
from nnet.gradcheck import numerical_gradient, relative_error
from nnet.layers import Conv2D, ConvTranspose2D, Dense, ReLU, Sigmoid, col2im, im2col
from nnet.optim import Adam
from nnet.training import TrainConfig, train
from nnet.weights import load_weights, save_weights
from sampling.windows import SampleLabel, SampleSet, WindowSample
from utils.errors import (
    NonFiniteActivation,
    ShapeMismatch,
    TrainingDiverged,
    WeightsArchitectureError,
    WeightsChecksumError,
)

GRAD_TOLERANCE = 1e-3
SEEDS = range(20)


def _window_set(rng, n=16, window=8, label=SampleLabel.UNLABELED):
    base = np.linspace(0.2, 0.8, window)[None, :] * np.ones((window, 1))
    samples = [
        WindowSample((base + 0.05 * rng.standard_normal((window, window))).clip(0, 1).astype(np.float32), i, 0, 0, label)
        for i in range(n)
    ]
    return SampleSet(samples, "windows", window, 1)


def _check_layer(layer, x, rng):
    """Compare analytic input and parameter gradients of sum(layer(x) * direction) with finite differences."""
    direction = rng.standard_normal(layer.forward(x).shape)
    layer.forward(x)
    dx = layer.backward(direction)
    analytic = {name: grad.copy() for name, grad in layer.grads.items()}

    loss = lambda: float(np.sum(layer.forward(x) * direction))  # noqa: E731
    assert relative_error(dx, numerical_gradient(loss, x)) < GRAD_TOLERANCE
    for name, param in layer.params.items():
        assert relative_error(analytic[name], numerical_gradient(loss, param)) < GRAD_TOLERANCE


class TestLayerGradients:
    @pytest.mark.parametrize("seed", SEEDS)
    def test_conv2d(self, seed):
        rng = np.random.default_rng(seed)
        layer = Conv2D(2, 3)
        layer.init_params(rng, np.float64)
        layer.params["bias"] = rng.standard_normal(3)
        _check_layer(layer, rng.standard_normal((2, 2, 6, 6)), rng)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_conv_transpose2d(self, seed):
        rng = np.random.default_rng(seed)
        layer = ConvTranspose2D(3, 2)
        layer.init_params(rng, np.float64)
        layer.params["bias"] = rng.standard_normal(2)
        _check_layer(layer, rng.standard_normal((2, 3, 3, 3)), rng)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_dense(self, seed):
        rng = np.random.default_rng(seed)
        layer = Dense(5, 4)
        layer.init_params(rng, np.float64)
        _check_layer(layer, rng.standard_normal((3, 5)), rng)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_sigmoid(self, seed):
        rng = np.random.default_rng(seed)
        _check_layer(Sigmoid(), rng.standard_normal((2, 1, 4, 4)), rng)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_relu_away_from_kink(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((2, 3, 4, 4))
        x += np.sign(x) * 0.1
        _check_layer(ReLU(), x, rng)

    def test_whole_model_bias_gradients(self, rng):
        model = CAEModel(4, window=8, seed=2, dtype=np.float64)
        batch = rng.random((2, 1, 8, 8))
        direction = rng.standard_normal((2, 1, 8, 8))
        model.forward(batch)
        model.backward(direction)
        analytic = {key: grad.copy() for key, _, grad in model.parameters() if key.endswith("bias")}

        loss = lambda: float(np.sum(model.forward(batch) * direction))  # noqa: E731
        for key, param, _ in model.parameters():
            if key in analytic and param.size <= 16:
                numeric = numerical_gradient(loss, param, eps=1e-6)
                assert relative_error(analytic[key], numeric) < 1e-5, key


class TestShapes:
    def test_im2col_col2im_adjoint(self, rng):
        # <im2col(x), c> == <x, col2im(c)>
        x = rng.standard_normal((2, 3, 7, 7))
        cols = im2col(x, 3, 2, 1)
        c = rng.standard_normal(cols.shape)
        assert np.isclose(np.sum(cols * c), np.sum(x * col2im(c, x.shape, 2, 1)))

    def test_round_trip_shape(self, rng):
        model = CAEModel(16, window=32, seed=0)
        out = model.forward(rng.random((3, 1, 32, 32)))
        assert out.shape == (3, 1, 32, 32)
        assert out.dtype == np.float32
        assert np.all((out > 0) & (out < 1))

    def test_latent_shape(self, rng):
        assert CAEModel(7, window=16).encode(rng.random((2, 1, 16, 16))).shape == (2, 7)

    @pytest.mark.parametrize("latent_dim", [2, 16, 128])
    def test_encode_length_follows_latent_dim(self, rng, latent_dim):
        latent = CAEModel(latent_dim, window=32, seed=0).encode(rng.random((3, 1, 32, 32)))
        assert latent.shape == (3, latent_dim)
        assert np.all(np.isfinite(latent))

    def test_window_multiple_of_eight(self):
        with pytest.raises(ValueError):
            CAEModel(4, window=12)

    def test_wrong_batch_shape(self, rng):
        with pytest.raises(ShapeMismatch):
            CAEModel(4, window=16).forward(rng.random((2, 1, 32, 32)))

    def test_non_finite_input(self):
        batch = np.zeros((1, 1, 8, 8))
        batch[0, 0, 3, 3] = np.nan
        with pytest.raises(NonFiniteActivation) as excinfo:
            CAEModel(4, window=8).forward(batch)
        assert excinfo.value.layer_index == 0

    def test_reconstruction_errors_are_per_window(self, rng):
        model = CAEModel(4, window=8)
        batch = rng.random((5, 1, 8, 8)).astype(np.float32)
        errors = model.reconstruction_errors(batch, batch_size=2)
        expected = np.mean((model.forward(batch).astype(np.float64) - batch) ** 2, axis=(1, 2, 3))
        assert errors.dtype == np.float64
        np.testing.assert_allclose(errors, expected, rtol=1e-5)


class TestAdam:
    class _Params:
        def __init__(self, param, grad):
            self.param, self.grad = param, grad

        def parameters(self):
            yield "p", self.param, self.grad

    def test_first_step_moves_by_learning_rate(self):
        holder = self._Params(np.zeros(3), np.array([0.5, -2.0, 1e-3]))
        Adam(learning_rate=0.01).step(holder)
        np.testing.assert_allclose(holder.param, [-0.01, 0.01, -0.01], rtol=1e-4)

    def test_zero_learning_rate_is_a_no_op(self):
        holder = self._Params(np.ones(2), np.array([3.0, -1.0]))
        optimizer = Adam(learning_rate=0.0)
        for _ in range(3):
            optimizer.step(holder)
        np.testing.assert_array_equal(holder.param, [1.0, 1.0])

    def test_negative_learning_rate(self):
        with pytest.raises(ValueError):
            Adam(learning_rate=-1.0)


class TestTraining:
    def test_loss_decreases(self, rng):
        result = train(CAEModel(4, window=8, seed=1), _window_set(rng), TrainConfig(epochs=30, batch_size=4, learning_rate=3e-3))
        assert len(result.history) == 30
        assert result.history[-1] < result.history[0]
        assert set(result.score_percentiles) == {"p50", "p99", "p99.9"}

    def test_overfits_a_constant_dataset(self):
        samples = [WindowSample(np.full((8, 8), 0.3, dtype=np.float32), i, 0, 0) for i in range(8)]
        windows = SampleSet(samples, "constant", 8, 1)
        result = train(CAEModel(4, window=8, seed=2), windows, TrainConfig(epochs=500, batch_size=8, learning_rate=1e-2))
        reconstruction = result.model.forward(windows.stack())
        assert float(np.mean((reconstruction - 0.3) ** 2)) <= 1e-3
        assert result.history[-1] <= 1e-3

    def test_zero_learning_rate_keeps_loss_flat(self, rng):
        model = CAEModel(4, window=8, seed=1)
        result = train(model, _window_set(rng), TrainConfig(epochs=3, batch_size=5, learning_rate=0.0))
        assert result.history == pytest.approx([result.history[0]] * 3, rel=1e-5)
        for (_, a, _), (_, b, _) in zip(model.parameters(), result.model.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_same_seed_same_model(self, rng):
        windows = _window_set(rng)
        config = TrainConfig(epochs=2, batch_size=4, seed=5)
        a = train(CAEModel(4, window=8, seed=3), windows, config)
        b = train(CAEModel(4, window=8, seed=3), windows, config)
        assert a.history == b.history
        for (_, pa, _), (_, pb, _) in zip(a.model.parameters(), b.model.parameters()):
            np.testing.assert_array_equal(pa, pb)

    def test_rejects_abnormal_windows(self, rng):
        with pytest.raises(ValueError):
            train(CAEModel(4, window=8), _window_set(rng, label=SampleLabel.ABNORMAL), TrainConfig(epochs=1))

    def test_rejects_empty_set(self):
        with pytest.raises(ValueError):
            train(CAEModel(4, window=8), SampleSet((), "none", 8, 1), TrainConfig(epochs=1))

    def test_nan_window_diverges(self, rng):
        windows = _window_set(rng, n=4)
        broken = np.array(windows.samples[0].pixels)
        broken[0, 0] = np.nan
        samples = (WindowSample(broken, 0, 0, 0),) + windows.samples[1:]
        with pytest.raises(TrainingDiverged) as excinfo:
            train(CAEModel(4, window=8), SampleSet(samples, "nan", 8, 1), TrainConfig(epochs=1, batch_size=8))
        assert excinfo.value.epoch == 0 and excinfo.value.batch == 0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)


class TestWeights:
    def test_round_trip(self, tmp_path, rng):
        model = CAEModel(6, window=16, seed=4)
        loaded = load_weights(save_weights(model, tmp_path / "cae.weights"))
        assert loaded.latent_dim == 6 and loaded.window == 16
        batch = rng.random((2, 1, 16, 16))
        np.testing.assert_array_equal(model.forward(batch), loaded.forward(batch))

    def test_corrupted_blob(self, tmp_path):
        path = save_weights(CAEModel(4, window=8), tmp_path / "cae.weights")
        data = bytearray(path.read_bytes())
        data[-1] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(WeightsChecksumError):
            load_weights(path)

    def test_truncated_blob(self, tmp_path):
        path = save_weights(CAEModel(4, window=8), tmp_path / "cae.weights")
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(WeightsChecksumError):
            load_weights(path)

    def test_header_for_another_latent_size(self, tmp_path):
        path = save_weights(CAEModel(4, window=8), tmp_path / "cae.weights")
        header, blob = path.read_bytes().split(b"\n", 1)
        data = json.loads(header)
        data["latent_dim"] = 8
        path.write_bytes(json.dumps(data).encode("utf-8") + b"\n" + blob)
        with pytest.raises(WeightsArchitectureError):
            load_weights(path)

    def test_unknown_format(self, tmp_path):
        path = save_weights(CAEModel(4, window=8), tmp_path / "cae.weights")
        header, blob = path.read_bytes().split(b"\n", 1)
        data = json.loads(header)
        data["format"] = "something-else"
        path.write_bytes(json.dumps(data).encode("utf-8") + b"\n" + blob)
        with pytest.raises(WeightsArchitectureError):
            load_weights(path)
