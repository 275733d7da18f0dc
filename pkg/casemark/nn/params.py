"""Trainable arrays and their bookkeeping.

Every weight matrix and bias vector of an agent is a [`Param`][casemark.nn.params.Param]:
a 64-bit float array together with a gradient buffer of the same shape and the
first and second moment estimates Adam needs.

Typical Usage:

    ```python
    import numpy as np
    from casemark import nn

    rng = nn.make_rng(42)
    weight = nn.Param(nn.init_uniform(rng, (16, 8)), name="weight")
    weight.accumulate(np.ones((16, 8)))
    nn.adam_step(weight, lr=0.01)
    ```
"""
from typing import Tuple

import numpy as np

from casemark.errors import ShapeError


def check_shape(array: np.ndarray, expected: Tuple[int, ...], what: str):
    """Raises a ShapeError if `array` does not have exactly the `expected` shape.

    Args:
        array: the array to check
        expected: the required shape
        what: a name for the operand used in the error message

    Raises:
        ShapeError: the shapes differ
    """
    if tuple(array.shape) != tuple(expected):
        raise ShapeError(what, tuple(expected), tuple(array.shape))


def init_uniform(rng: np.random.Generator, shape: Tuple[int, ...], scale: float = 0.1):
    """Draws a weight array uniformly from [-scale, scale]."""
    return rng.uniform(-scale, scale, size=shape)


class Param:
    """A trainable array.

    Args:
        value: the initial value; copied and cast to float64
        name: a label used in checkpoints and error messages

    Attributes:
        value: the current value
        grad: the accumulated gradient, same shape as value
        adam_m: Adam's first moment estimate
        adam_v: Adam's second moment estimate
        step_count: the number of optimizer steps applied so far
    """

    def __init__(self, value: np.ndarray, name: str = ""):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.adam_m = np.zeros_like(self.value)
        self.adam_v = np.zeros_like(self.value)
        self.step_count = 0

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def accumulate(self, grad: np.ndarray):
        """Adds `grad` into the gradient buffer.

        Raises:
            ShapeError: grad does not have the shape of the value
        """
        check_shape(grad, self.value.shape, f"gradient of {self.name or 'param'}")
        self.grad += grad

    def zero_grad(self):
        self.grad.fill(0.0)

    def reset_moments(self):
        """Forgets the optimizer state, as if a fresh optimizer were created."""
        self.adam_m.fill(0.0)
        self.adam_v.fill(0.0)
        self.step_count = 0

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.shape})"
