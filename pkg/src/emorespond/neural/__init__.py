from .inference import InferenceSession, forward
from .spec import (
    BatchNorm, Conv2D, Dense, GlobalAvgPool, MaxPool2D, NetworkSpec, ReLU, Softmax,
    default_spec, param_count, tiny_spec,
)
from .training import TrainOptions, TrainTrace, backward, predict_batch, train
from .weights import WeightSet, init_weights, load_weights, quantize_int8, save_weights, zero_weights

__all__ = [
    "BatchNorm", "Conv2D", "Dense", "GlobalAvgPool", "MaxPool2D", "NetworkSpec", "ReLU", "Softmax",
    "default_spec", "param_count", "tiny_spec", "InferenceSession", "forward",
    "TrainOptions", "TrainTrace", "backward", "predict_batch", "train",
    "WeightSet", "init_weights", "load_weights", "quantize_int8", "save_weights", "zero_weights",
]
