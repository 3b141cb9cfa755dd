"""Small float64 neural-network engine: dense + batch norm + LSTM,
reverse-mode gradients, Adam, stable binary cross-entropy."""

from .layers import Dense, Parameter, dense_forward, sigmoid
from .losses import accel_penalty, bce_with_logits, mean_abs, mse
from .network import Network, build_from_descriptor, mlp
from .optim import Adam, adam_step
from .recurrent import LSTM, lstm_cell
from .io import load_network, save_network

__all__ = [
    "Adam", "Dense", "LSTM", "Network", "Parameter",
    "accel_penalty", "adam_step", "bce_with_logits", "build_from_descriptor",
    "dense_forward", "load_network", "lstm_cell", "mean_abs", "mlp", "mse",
    "save_network", "sigmoid",
]
