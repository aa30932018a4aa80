from .layers import (Conv1D, Dense, Flatten, GRU, LSTM, ReLU,
                     softmax_cross_entropy)
from .model import (Adam, Classifier, ModelFamily, ModelSpec, SGD,
                    TrainConfig, TrainingDiverged, accuracy, build_model,
                    default_spec, load_model, predict, save_model, train)

__all__ = [
    "Conv1D", "Dense", "Flatten", "GRU", "LSTM", "ReLU",
    "softmax_cross_entropy",
    "Adam", "Classifier", "ModelFamily", "ModelSpec", "SGD", "TrainConfig",
    "TrainingDiverged", "accuracy", "build_model", "default_spec",
    "load_model", "predict", "save_model", "train",
]
