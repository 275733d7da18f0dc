"""Adam updates.

The update is the standard one with bias correction:

    m_t = β1 m_{t-1} + (1 - β1) g
    v_t = β2 v_{t-1} + (1 - β2) g²
    w  -= lr · (m_t / (1 - β1^t)) / (sqrt(v_t / (1 - β2^t)) + ε)

The gradient buffer is zeroed after every step; accumulation between steps is additive.
"""
from typing import Iterable, List, Optional

import numpy as np

from .params import Param

BETA_1 = 0.9
BETA_2 = 0.999
EPSILON = 1e-8


def adam_step(
    p: Param,
    lr: float,
    beta_1: float = BETA_1,
    beta_2: float = BETA_2,
    epsilon: float = EPSILON,
):
    """Applies one Adam update to `p` in place and clears its gradient.

    Args:
        p: the parameter whose `grad` is populated
        lr: the learning rate
        beta_1: decay rate of the first moment
        beta_2: decay rate of the second moment
        epsilon: added to the denominator
    """
    p.step_count += 1
    t = p.step_count
    p.adam_m = beta_1 * p.adam_m + (1.0 - beta_1) * p.grad
    p.adam_v = beta_2 * p.adam_v + (1.0 - beta_2) * p.grad**2
    m_hat = p.adam_m / (1.0 - beta_1**t)
    v_hat = p.adam_v / (1.0 - beta_2**t)
    p.value -= lr * m_hat / (np.sqrt(v_hat) + epsilon)
    p.zero_grad()


class Adam:
    """The default Adam optimizer over a fixed list of parameters.

    Args:
        params: the parameters to optimize
        lr: the learning rate
        clip_norm: if positive, gradients are rescaled so that their global L2 norm
            over the stepped parameters does not exceed this value

    Example:
        ```python
        from casemark import nn

        optimizer = nn.Adam(agent.params(), lr=0.01)
        # ... accumulate gradients ...
        optimizer.step()
        ```
    """

    def __init__(self, params: Iterable[Param], lr: float, clip_norm: float = 0.0):
        self.params: List[Param] = list(params)
        self.lr = lr
        self.clip_norm = clip_norm

    def step(self, params: Optional[Iterable[Param]] = None):
        """Updates `params` (default: all parameters) and clears their gradients.

        Parameters outside `params` keep their gradient buffers and moments untouched.
        """
        targets = self.params if params is None else list(params)
        if self.clip_norm > 0:
            _clip_global_norm(targets, self.clip_norm)

        for p in targets:
            adam_step(p, self.lr)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def reset(self):
        """Clears moments and step counts of every parameter."""
        for p in self.params:
            p.reset_moments()


def _clip_global_norm(params: List[Param], max_norm: float):
    total = np.sqrt(sum(float(np.sum(p.grad**2)) for p in params))
    if total > max_norm:
        scale = max_norm / (total + EPSILON)
        for p in params:
            p.grad *= scale
