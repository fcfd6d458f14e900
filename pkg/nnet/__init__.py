from nnet.autoencoder import CAEModel
from nnet.layers import Conv2D, ConvTranspose2D, Dense, Flatten, ReLU, Reshape, Sigmoid
from nnet.optim import Adam
from nnet.training import TrainConfig, TrainResult, train
from nnet.weights import load_weights, save_weights

__all__ = [
    "CAEModel",
    "Conv2D",
    "ConvTranspose2D",
    "Dense",
    "Flatten",
    "ReLU",
    "Reshape",
    "Sigmoid",
    "Adam",
    "TrainConfig",
    "TrainResult",
    "train",
    "load_weights",
    "save_weights",
]
