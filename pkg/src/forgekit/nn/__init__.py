"""Minimal deterministic reverse-mode neural-network engine."""
from .gradcheck import (GradCheckRow, default_epsilon, default_tolerance,
                        finite_difference_gradient, layer_gradient_suite,
                        relative_error)
from .layers import (Conv2D, Flatten, FullyConnected, GradientReversal, Layer,
                     MaxPool2D, ReLU, Softmax, grl_backward, grl_forward,
                     run_backward, run_forward, stack_parameters)
from .losses import softmax_cross_entropy
from .optim import Adam, Optimizer, SGDMomentum
from .tensor import Tensor, as_tensor

__all__ = [
    "Adam", "Conv2D", "Flatten", "FullyConnected", "GradCheckRow",
    "GradientReversal", "Layer", "MaxPool2D", "Optimizer", "ReLU",
    "SGDMomentum", "Softmax", "Tensor", "as_tensor", "default_epsilon",
    "default_tolerance", "finite_difference_gradient", "grl_backward",
    "grl_forward", "layer_gradient_suite", "relative_error", "run_backward",
    "run_forward", "softmax_cross_entropy", "stack_parameters",
]
