"""Layer building blocks for the convolutional autoencoder.

Tensors are numpy arrays in (batch, channels, height, width) layout. Every
layer caches what it needs during ``forward`` and returns the input gradient
from ``backward``, leaving parameter gradients in ``grads`` (same keys as
``params``). Convolutions follow the usual ML convention of correlating
rather than flipping the kernel.
"""

from abc import ABC, abstractmethod

import numpy as np
from scipy.special import expit

from utils.errors import ShapeMismatch


def im2col(x, kernel, stride, pad):
    """Gather kernel-sized patches: (N, C, H, W) -> (N, C, k, k, Ho, Wo)."""
    n, c, h, w = x.shape
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out_h = (h + 2 * pad - kernel) // stride + 1
    out_w = (w + 2 * pad - kernel) // stride + 1
    cols = np.empty((n, c, kernel, kernel, out_h, out_w), dtype=x.dtype)
    for i in range(kernel):
        for j in range(kernel):
            cols[:, :, i, j] = padded[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride]
    return cols


def col2im(cols, shape, stride, pad):
    """Scatter-add patches back onto an (N, C, H, W) grid; inverse layout of im2col."""
    n, c, kernel, _, out_h, out_w = cols.shape
    _, _, h, w = shape
    padded = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for i in range(kernel):
        for j in range(kernel):
            padded[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += cols[:, :, i, j]
    return padded[:, :, pad:pad + h, pad:pad + w]


def _kaiming_uniform(rng, shape, fan_in, dtype):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Layer(ABC):
    kind = "layer"

    def __init__(self):
        self.params = {}
        self.grads = {}

    @abstractmethod
    def forward(self, x):
        pass

    @abstractmethod
    def backward(self, grad):
        pass

    @abstractmethod
    def output_shape(self, input_shape):
        """Per-sample shape transform (batch axis excluded)."""
        pass

    def init_params(self, rng, dtype):
        pass

    def describe(self):
        return {"type": self.kind}

    def astype(self, dtype):
        for key, value in self.params.items():
            self.params[key] = value.astype(dtype)
        self.grads = {}
        return self

    @property
    def num_params(self):
        return sum(p.size for p in self.params.values())

    def _check_channels(self, x, channels):
        if x.ndim != 4 or x.shape[1] != channels:
            raise ShapeMismatch(f"{self.kind}: expected (N, {channels}, H, W) input, got {x.shape}")


class Conv2D(Layer):
    kind = "conv2d"

    def __init__(self, in_channels, out_channels, kernel=3, stride=2, pad=1):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        self.params = {
            "weight": np.zeros((out_channels, in_channels, kernel, kernel), dtype=np.float32),
            "bias": np.zeros(out_channels, dtype=np.float32),
        }

    def init_params(self, rng, dtype):
        fan_in = self.in_channels * self.kernel * self.kernel
        self.params["weight"] = _kaiming_uniform(rng, self.params["weight"].shape, fan_in, dtype)
        self.params["bias"] = np.zeros(self.out_channels, dtype=dtype)

    def output_shape(self, input_shape):
        _, h, w = input_shape
        size = lambda n: (n + 2 * self.pad - self.kernel) // self.stride + 1  # noqa: E731
        return (self.out_channels, size(h), size(w))

    def forward(self, x):
        self._check_channels(x, self.in_channels)
        self._x_shape = x.shape
        self._cols = im2col(x, self.kernel, self.stride, self.pad)
        out = np.tensordot(self._cols, self.params["weight"], axes=([1, 2, 3], [1, 2, 3]))
        return out.transpose(0, 3, 1, 2) + self.params["bias"][None, :, None, None]

    def backward(self, grad):
        weight = self.params["weight"]
        self.grads = {
            "weight": np.tensordot(grad, self._cols, axes=([0, 2, 3], [0, 4, 5])),
            "bias": grad.sum(axis=(0, 2, 3)),
        }
        dcols = np.tensordot(weight, grad, axes=([0], [1])).transpose(3, 0, 1, 2, 4, 5)
        return col2im(dcols, self._x_shape, self.stride, self.pad)

    def describe(self):
        return {
            "type": self.kind,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel": self.kernel,
            "stride": self.stride,
            "pad": self.pad,
        }


class ConvTranspose2D(Layer):
    """Transposed convolution; its forward pass is Conv2D's input gradient."""

    kind = "conv_transpose2d"

    def __init__(self, in_channels, out_channels, kernel=3, stride=2, pad=1, output_padding=1):
        super().__init__()
        if output_padding >= stride:
            raise ValueError("output_padding must be smaller than stride")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        self.output_padding = output_padding
        self.params = {
            "weight": np.zeros((in_channels, out_channels, kernel, kernel), dtype=np.float32),
            "bias": np.zeros(out_channels, dtype=np.float32),
        }

    def init_params(self, rng, dtype):
        # Each output pixel sees roughly in_channels * k^2 / stride^2 inputs.
        fan_in = self.in_channels * self.kernel * self.kernel / self.stride ** 2
        self.params["weight"] = _kaiming_uniform(rng, self.params["weight"].shape, fan_in, dtype)
        self.params["bias"] = np.zeros(self.out_channels, dtype=dtype)

    def output_shape(self, input_shape):
        _, h, w = input_shape
        size = lambda n: (n - 1) * self.stride - 2 * self.pad + self.kernel + self.output_padding  # noqa: E731
        return (self.out_channels, size(h), size(w))

    def forward(self, x):
        self._check_channels(x, self.in_channels)
        self._x = x
        n = x.shape[0]
        _, out_h, out_w = self.output_shape(x.shape[1:])
        cols = np.tensordot(x, self.params["weight"], axes=([1], [0])).transpose(0, 3, 4, 5, 1, 2)
        out = col2im(cols, (n, self.out_channels, out_h, out_w), self.stride, self.pad)
        return out + self.params["bias"][None, :, None, None]

    def backward(self, grad):
        dcols = im2col(grad, self.kernel, self.stride, self.pad)
        self.grads = {
            "weight": np.tensordot(self._x, dcols, axes=([0, 2, 3], [0, 4, 5])),
            "bias": grad.sum(axis=(0, 2, 3)),
        }
        dx = np.tensordot(dcols, self.params["weight"], axes=([1, 2, 3], [1, 2, 3]))
        return dx.transpose(0, 3, 1, 2)

    def describe(self):
        return {
            "type": self.kind,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel": self.kernel,
            "stride": self.stride,
            "pad": self.pad,
            "output_padding": self.output_padding,
        }


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features, out_features):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.params = {
            "weight": np.zeros((in_features, out_features), dtype=np.float32),
            "bias": np.zeros(out_features, dtype=np.float32),
        }

    def init_params(self, rng, dtype):
        self.params["weight"] = _kaiming_uniform(rng, self.params["weight"].shape, self.in_features, dtype)
        self.params["bias"] = np.zeros(self.out_features, dtype=dtype)

    def output_shape(self, input_shape):
        return (self.out_features,)

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(f"dense: expected (N, {self.in_features}) input, got {x.shape}")
        self._x = x
        return x @ self.params["weight"] + self.params["bias"]

    def backward(self, grad):
        self.grads = {"weight": self._x.T @ grad, "bias": grad.sum(axis=0)}
        return grad @ self.params["weight"].T

    def describe(self):
        return {"type": self.kind, "in_features": self.in_features, "out_features": self.out_features}


class ReLU(Layer):
    kind = "relu"

    def output_shape(self, input_shape):
        return tuple(input_shape)

    def forward(self, x):
        self._active = x > 0
        return np.where(self._active, x, 0).astype(x.dtype)

    def backward(self, grad):
        return np.where(self._active, grad, 0).astype(grad.dtype)


class Sigmoid(Layer):
    kind = "sigmoid"

    def output_shape(self, input_shape):
        return tuple(input_shape)

    def forward(self, x):
        self._y = expit(x)
        return self._y

    def backward(self, grad):
        return grad * self._y * (1 - self._y)


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x):
        self._x_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._x_shape)


class Reshape(Layer):
    kind = "reshape"

    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(shape)

    def output_shape(self, input_shape):
        if int(np.prod(input_shape)) != int(np.prod(self.shape)):
            raise ShapeMismatch(f"reshape: cannot view {input_shape} as {self.shape}")
        return self.shape

    def forward(self, x):
        self._x_shape = x.shape
        return x.reshape(x.shape[0], *self.shape)

    def backward(self, grad):
        return grad.reshape(self._x_shape)

    def describe(self):
        return {"type": self.kind, "shape": list(self.shape)}


LAYER_TYPES = {
    cls.kind: cls for cls in (Conv2D, ConvTranspose2D, Dense, ReLU, Sigmoid, Flatten, Reshape)
}


def layer_from_description(description):
    description = dict(description)
    cls = LAYER_TYPES[description.pop("type")]
    return cls(**description)
