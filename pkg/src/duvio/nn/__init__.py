from . import autograd
from .autograd import Tensor
from .layers import (Module, Conv2d, ConvTranspose2d, Conv1d, DepthwiseConv2d,
                     Linear, BatchNorm2d, LSTM)
from .optim import Adam
from .weights_io import save_weights, load_weights

__all__ = ["autograd", "Tensor", "Module", "Conv2d", "ConvTranspose2d",
           "Conv1d", "DepthwiseConv2d", "Linear", "BatchNorm2d", "LSTM",
           "Adam", "save_weights", "load_weights"]
