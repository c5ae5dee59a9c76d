"""The per-window regression CNN.

Layout: conv, conv, pool, conv, conv, pool, then two fully connected
layers producing one scalar per input window. Every convolution is 3x3
with "same" zero padding and is followed by batch normalization and ReLU.
Channel counts are deliberately small; wider variants generalize worse
across designs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from .layers import BatchNorm, Conv2D, Dense, Flatten, Layer, MaxPool2x2, ReLU


@dataclass(frozen=True)
class NetConfig:
    """Architecture descriptor; fully determines parameter shapes."""

    k: int
    c_in: int = 5
    conv_channels: tuple[int, int, int, int] = (16, 16, 32, 32)
    fc_units: int = 128
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def validate(self) -> None:
        if self.k < 3 or self.k % 2 != 1:
            raise ShapeError(f"window size must be odd and >= 3, got {self.k}")
        if self.k // 2 // 2 < 1:
            raise ShapeError(f"window size {self.k} too small for two poolings")

    @property
    def flat_features(self) -> int:
        side = self.k // 2 // 2
        return side * side * self.conv_channels[3]

    def to_dict(self) -> dict:
        return {
            "k": self.k, "c_in": self.c_in,
            "conv_channels": list(self.conv_channels),
            "fc_units": self.fc_units,
            "bn_eps": self.bn_eps, "bn_momentum": self.bn_momentum,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(
            k=int(d["k"]), c_in=int(d["c_in"]),
            conv_channels=tuple(int(c) for c in d["conv_channels"]),
            fc_units=int(d["fc_units"]),
            bn_eps=float(d["bn_eps"]), bn_momentum=float(d["bn_momentum"]),
        )


class ConvNet:
    """Maps a ``(n, k, k, c_in)`` batch of windows to ``n`` scalars."""

    def __init__(self, config: NetConfig, seed: int = 0):
        config.validate()
        self.config = config
        rng = np.random.default_rng(np.random.PCG64(seed))
        c = config.conv_channels
        self.layers: list[tuple[str, Layer]] = [
            ("conv1", Conv2D(config.c_in, c[0], rng=rng)),
            ("bn1", BatchNorm(c[0], config.bn_eps, config.bn_momentum)),
            ("relu1", ReLU()),
            ("conv2", Conv2D(c[0], c[1], rng=rng)),
            ("bn2", BatchNorm(c[1], config.bn_eps, config.bn_momentum)),
            ("relu2", ReLU()),
            ("pool1", MaxPool2x2()),
            ("conv3", Conv2D(c[1], c[2], rng=rng)),
            ("bn3", BatchNorm(c[2], config.bn_eps, config.bn_momentum)),
            ("relu3", ReLU()),
            ("conv4", Conv2D(c[2], c[3], rng=rng)),
            ("bn4", BatchNorm(c[3], config.bn_eps, config.bn_momentum)),
            ("relu4", ReLU()),
            ("pool2", MaxPool2x2()),
            ("flatten", Flatten()),
            ("fc1", Dense(config.flat_features, config.fc_units, rng=rng)),
            ("relu5", ReLU()),
            ("fc2", Dense(config.fc_units, 1, rng=rng)),
        ]

    def forward(self, x: np.ndarray, train: bool = False,
                update_running: bool = True) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.config.k or x.shape[2] != self.config.k:
            raise ShapeError(
                f"expected (n, {self.config.k}, {self.config.k}, {self.config.c_in}), "
                f"got {x.shape}"
            )
        out = x
        for _, layer in self.layers:
            if isinstance(layer, BatchNorm):
                out = layer.forward(out, train=train, update_running=update_running)
            else:
                out = layer.forward(out, train=train)
        return out[:, 0]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        grad = dout[:, None]
        for _, layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def params(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name, layer in self.layers:
            for key, arr in layer.params().items():
                out[f"{name}.{key}"] = arr
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name, layer in self.layers:
            for key, arr in layer.grads().items():
                out[f"{name}.{key}"] = arr
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name, layer in self.layers:
            for key, arr in layer.buffers().items():
                out[f"{name}.{key}"] = arr
        return out

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Parameters plus batch-norm running statistics, in a stable order."""
        out = self.params()
        out.update(self.buffers())
        return out

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        state = self.state_arrays()
        missing = set(state) - set(arrays)
        if missing:
            raise ShapeError(f"checkpoint missing arrays: {sorted(missing)}")
        for name, target in state.items():
            src = arrays[name]
            if src.shape != target.shape:
                raise ShapeError(
                    f"array {name}: shape {src.shape} != expected {target.shape}"
                )
            target[...] = src

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.state_arrays().items()}
