"""Dense-tensor layer kernels with exact backpropagation.

Everything is float64 NHWC. Each layer caches what its backward pass needs
on forward and exposes ``params()``/``grads()`` dicts (empty for stateless
layers) so the optimizer and the checkpoint writer can treat the network
as a flat, ordered collection of named arrays.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError


class Layer:
    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def buffers(self) -> dict[str, np.ndarray]:
        return {}


class Conv2D(Layer):
    """Odd-kernel, stride-1, zero-padded ("same") 2-D convolution."""

    def __init__(self, c_in: int, c_out: int, ksize: int = 3,
                 rng: np.random.Generator | None = None):
        if ksize % 2 != 1:
            raise ShapeError(f"conv kernel size must be odd, got {ksize}")
        self.c_in, self.c_out, self.ksize = c_in, c_out, ksize
        fan_in = ksize * ksize * c_in
        lim = 1.0 / np.sqrt(fan_in)
        rng = rng or np.random.default_rng(0)
        self.w = rng.uniform(-lim, lim, size=(ksize, ksize, c_in, c_out))
        self.b = rng.uniform(-lim, lim, size=(c_out,))
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 4 or x.shape[3] != self.c_in:
            raise ShapeError(
                f"conv expects (n, h, w, {self.c_in}), got {x.shape}"
            )
        n, hh, ww, _ = x.shape
        k, p = self.ksize, self.ksize // 2
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
        # (n, hh, ww, c_in, k, k) view -> (rows, k*k*c_in) patch matrix
        patches = sliding_window_view(xp, (k, k), axis=(1, 2))
        cols = patches.transpose(0, 1, 2, 4, 5, 3).reshape(n * hh * ww, k * k * self.c_in)
        y = cols @ self.w.reshape(-1, self.c_out) + self.b
        self._cache = (x.shape, cols)
        return y.reshape(n, hh, ww, self.c_out)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        (n, hh, ww, _), cols = self._cache
        k, p = self.ksize, self.ksize // 2
        dy2 = dy.reshape(-1, self.c_out)
        self.dw[...] = (cols.T @ dy2).reshape(self.w.shape)
        self.db[...] = dy2.sum(axis=0)
        dcols = (dy2 @ self.w.reshape(-1, self.c_out).T).reshape(
            n, hh, ww, k, k, self.c_in
        )
        dxp = np.zeros((n, hh + 2 * p, ww + 2 * p, self.c_in))
        for i in range(k):
            for j in range(k):
                dxp[:, i:i + hh, j:j + ww, :] += dcols[:, :, :, i, j, :]
        return dxp[:, p:p + hh, p:p + ww, :]

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}


class BatchNorm(Layer):
    """Per-channel batch normalization over all non-channel axes.

    Training mode normalizes with biased batch statistics and (optionally)
    updates the running estimates; inference mode is the frozen affine map
    ``gamma * (x - running_mean) / sqrt(running_var + eps) + beta``.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.dgamma = np.zeros(channels)
        self.dbeta = np.zeros(channels)
        self._cache = None

    def forward(self, x: np.ndarray, train: bool = False,
                update_running: bool = True) -> np.ndarray:
        if x.shape[-1] != self.channels:
            raise ShapeError(f"batchnorm expects {self.channels} channels, got {x.shape}")
        xm = x.reshape(-1, self.channels)
        if train:
            mu = xm.mean(axis=0)
            var = np.mean((xm - mu) ** 2, axis=0)
            inv = 1.0 / np.sqrt(var + self.eps)
            xhat = (xm - mu) * inv
            if update_running:
                m = self.momentum
                self.running_mean[...] = (1 - m) * self.running_mean + m * mu
                self.running_var[...] = (1 - m) * self.running_var + m * var
            self._cache = ("train", x.shape, xhat, inv)
        else:
            inv = 1.0 / np.sqrt(self.running_var + self.eps)
            xhat = (xm - self.running_mean) * inv
            self._cache = ("eval", x.shape, xhat, inv)
        return (self.gamma * xhat + self.beta).reshape(x.shape)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        mode, shape, xhat, inv = self._cache
        dy2 = dy.reshape(-1, self.channels)
        self.dgamma[...] = (dy2 * xhat).sum(axis=0)
        self.dbeta[...] = dy2.sum(axis=0)
        if mode == "eval":
            return (dy2 * self.gamma * inv).reshape(shape)
        m = dy2.shape[0]
        dxhat = dy2 * self.gamma
        dx = (inv / m) * (m * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        return dx.reshape(shape)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.dgamma, "beta": self.dbeta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class ReLU(Layer):
    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return np.where(self._mask, dy, 0.0)


class MaxPool2x2(Layer):
    """2x2 max pooling, stride 2; odd trailing rows/columns are dropped.

    Gradient flows only to the argmax position; ties resolve to the first
    maximum in row-major scan order of the 2x2 block.
    """

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        n, hh, ww, c = x.shape
        h2, w2 = hh // 2, ww // 2
        if h2 == 0 or w2 == 0:
            raise ShapeError(f"input {x.shape} too small for 2x2 pooling")
        xc = x[:, :2 * h2, :2 * w2, :]
        blocks = xc.reshape(n, h2, 2, w2, 2, c).transpose(0, 1, 3, 5, 2, 4)
        flat = blocks.reshape(n, h2, w2, c, 4)
        self._arg = np.argmax(flat, axis=-1)
        self._shape = x.shape
        return np.take_along_axis(flat, self._arg[..., None], axis=-1)[..., 0]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        n, hh, ww, c = self._shape
        h2, w2 = hh // 2, ww // 2
        dflat = np.zeros((n, h2, w2, c, 4))
        np.put_along_axis(dflat, self._arg[..., None], dy[..., None], axis=-1)
        dxc = dflat.reshape(n, h2, w2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3)
        dx = np.zeros((n, hh, ww, c))
        dx[:, :2 * h2, :2 * w2, :] = dxc.reshape(n, 2 * h2, 2 * w2, c)
        return dx


class Flatten(Layer):
    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy.reshape(self._shape)


class Dense(Layer):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator | None = None):
        lim = 1.0 / np.sqrt(d_in)
        rng = rng or np.random.default_rng(0)
        self.w = rng.uniform(-lim, lim, size=(d_in, d_out))
        self.b = rng.uniform(-lim, lim, size=(d_out,))
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.w.shape[0]:
            raise ShapeError(f"dense expects (n, {self.w.shape[0]}), got {x.shape}")
        self._x = x
        return x @ self.w + self.b

    def backward(self, dy: np.ndarray) -> np.ndarray:
        self.dw[...] = self._x.T @ dy
        self.db[...] = dy.sum(axis=0)
        return dy @ self.w.T

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}


def l1_loss(pred: np.ndarray, label: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise absolute error and its subgradient w.r.t. ``pred``
    (0 at exact equality)."""
    pred = np.asarray(pred, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    diff = pred - label
    return np.abs(diff), np.sign(diff)
