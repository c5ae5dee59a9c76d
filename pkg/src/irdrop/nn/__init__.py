from .layers import BatchNorm, Conv2D, Dense, Flatten, MaxPool2x2, ReLU, l1_loss
from .net import ConvNet, NetConfig
from .optim import Adam
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Adam", "BatchNorm", "Conv2D", "ConvNet", "Dense", "Flatten",
    "MaxPool2x2", "NetConfig", "ReLU", "l1_loss",
    "load_checkpoint", "save_checkpoint",
]
