"""Symmetric convolutional autoencoder for single-channel square windows.

Encoder: three stride-2 3x3 convolutions (1 -> 16 -> 32 -> 64 channels, each
followed by ReLU) take a 32 px window down to 4x4, then a dense layer maps the
flattened features to the latent vector. The decoder mirrors it with a dense
layer, three stride-2 transposed convolutions and a final sigmoid.
"""

import copy
import logging

import numpy as np

from nnet.layers import (
    Conv2D,
    ConvTranspose2D,
    Dense,
    Flatten,
    ReLU,
    Reshape,
    Sigmoid,
    layer_from_description,
)
from utils.errors import NonFiniteActivation, ShapeMismatch
from utils.helpers import make_rng

CHANNELS = (1, 16, 32, 64)
DOWNSAMPLING = 2 ** (len(CHANNELS) - 1)


class CAEModel:
    def __init__(self, latent_dim, window=32, seed=0, dtype=np.float32, initialize=True):
        if latent_dim < 1:
            raise ValueError(f"latent_dim must be positive, got {latent_dim}")
        if window % DOWNSAMPLING:
            raise ValueError(f"window must be a multiple of {DOWNSAMPLING}, got {window}")
        self.latent_dim = int(latent_dim)
        self.window = int(window)
        self.dtype = np.dtype(dtype)

        bottleneck = (CHANNELS[-1], window // DOWNSAMPLING, window // DOWNSAMPLING)
        flat = int(np.prod(bottleneck))

        self.encoder = []
        for c_in, c_out in zip(CHANNELS, CHANNELS[1:]):
            self.encoder += [Conv2D(c_in, c_out), ReLU()]
        self.encoder += [Flatten(), Dense(flat, self.latent_dim)]

        self.decoder = [Dense(self.latent_dim, flat), ReLU(), Reshape(bottleneck)]
        reversed_channels = CHANNELS[::-1]
        for c_in, c_out in zip(reversed_channels, reversed_channels[1:]):
            self.decoder += [ConvTranspose2D(c_in, c_out), ReLU()]
        self.decoder[-1] = Sigmoid()

        if initialize:
            rng = make_rng(seed)
            for layer in self.layers:
                layer.init_params(rng, self.dtype)
            logging.info(
                "Built CAE: latent %d, window %d, %d parameters.", self.latent_dim, self.window, self.num_params
            )

    @property
    def layers(self):
        return self.encoder + self.decoder

    @property
    def num_params(self):
        return sum(layer.num_params for layer in self.layers)

    @property
    def input_shape(self):
        return (1, self.window, self.window)

    def _run(self, layers, x, offset):
        for index, layer in enumerate(layers):
            x = layer.forward(x)
            if not np.all(np.isfinite(x)):
                raise NonFiniteActivation(
                    f"non-finite activation after layer {offset + index} ({layer.kind})",
                    layer_index=offset + index,
                )
        return x

    def _check_batch(self, batch):
        batch = np.asarray(batch)
        if batch.ndim != 4 or batch.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"expected batch of shape (N, {self.input_shape}), got {batch.shape}")
        return batch.astype(self.dtype, copy=False)

    def encode(self, batch):
        return self._run(self.encoder, self._check_batch(batch), 0)

    def decode(self, latent):
        return self._run(self.decoder, np.asarray(latent, dtype=self.dtype), len(self.encoder))

    def forward(self, batch):
        return self.decode(self.encode(batch))

    def backward(self, grad):
        """Backpropagate d(loss)/d(reconstruction) through the last forward pass."""
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self):
        """Yield (key, param, grad) for every learnable array, in a fixed order."""
        for index, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                yield f"{index}.{name}", layer.params[name], layer.grads.get(name)

    def reconstruction_errors(self, batch, batch_size=256):
        """Per-window mean squared reconstruction error (float64)."""
        batch = self._check_batch(batch)
        errors = np.empty(len(batch), dtype=np.float64)
        for start in range(0, len(batch), batch_size):
            chunk = batch[start:start + batch_size]
            diff = self.forward(chunk).astype(np.float64) - chunk.astype(np.float64)
            errors[start:start + batch_size] = np.mean(diff ** 2, axis=(1, 2, 3))
        return errors

    def architecture(self):
        return [layer.describe() for layer in self.layers]

    def copy(self):
        return copy.deepcopy(self)

    def astype(self, dtype):
        clone = self.copy()
        clone.dtype = np.dtype(dtype)
        for layer in clone.layers:
            layer.astype(clone.dtype)
        return clone

    @classmethod
    def from_architecture(cls, latent_dim, window, architecture, dtype=np.float32):
        """Uninitialized model whose layer list must match ``architecture``."""
        model = cls(latent_dim, window=window, dtype=dtype, initialize=False)
        rebuilt = [layer_from_description(d) for d in architecture]
        if [l.describe() for l in rebuilt] != model.architecture():
            raise ShapeMismatch("architecture does not describe the symmetric CAE for this latent size")
        for layer in model.layers:
            layer.astype(model.dtype)
        return model
