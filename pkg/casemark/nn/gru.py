"""Gated Recurrent Unit cell with an exact backward pass.

The cell follows the standard formulation:

    z  = σ(W_z x + U_z h + b_z)
    r  = σ(W_r x + U_r h + b_r)
    h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
    h' = (1 − z) ⊙ h + z ⊙ h̃

Inputs may be single vectors or (B, dim) batches; rows are independent.
"""
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from casemark.errors import MissingCacheError, ShapeError
from .functional import sigmoid
from .params import Param, init_uniform


class GruParams:
    """Weights of one GRU cell.

    Args:
        input_dim: size of x
        hidden_dim: size of h
        rng: generator for the uniform weight initialisation
        name: prefix for the parameter names
        init_scale: weights are drawn from [-init_scale, init_scale]; biases start at zero
    """

    def __init__(
        self,
        input_dim: int,
        hidden_dim: int,
        rng: np.random.Generator,
        name: str = "gru",
        init_scale: float = 0.1,
    ):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim

        def weight(suffix: str, cols: int) -> Param:
            value = init_uniform(rng, (hidden_dim, cols), init_scale)
            return Param(value, f"{name}.{suffix}")

        self.W_z = weight("W_z", input_dim)
        self.W_r = weight("W_r", input_dim)
        self.W_h = weight("W_h", input_dim)
        self.U_z = weight("U_z", hidden_dim)
        self.U_r = weight("U_r", hidden_dim)
        self.U_h = weight("U_h", hidden_dim)
        self.b_z = Param(np.zeros(hidden_dim), f"{name}.b_z")
        self.b_r = Param(np.zeros(hidden_dim), f"{name}.b_r")
        self.b_h = Param(np.zeros(hidden_dim), f"{name}.b_h")

    def params(self) -> List[Param]:
        return [
            self.W_z,
            self.W_r,
            self.W_h,
            self.U_z,
            self.U_r,
            self.U_h,
            self.b_z,
            self.b_r,
            self.b_h,
        ]


class GruCache(NamedTuple):
    """Intermediates of one forward step, kept for the backward pass."""

    x: np.ndarray
    h: np.ndarray
    z: np.ndarray
    r: np.ndarray
    h_tilde: np.ndarray
    is_vector: bool


def gru_step(
    x: np.ndarray, h: np.ndarray, p: GruParams
) -> Tuple[np.ndarray, GruCache]:
    """Runs one step of the cell.

    Args:
        x: the input, shape (input_dim,) or (B, input_dim)
        h: the previous hidden state, shape (hidden_dim,) or (B, hidden_dim)
        p: the cell weights

    Returns:
        a tuple (h', cache) where cache is needed by `gru_backward`

    Raises:
        ShapeError: x or h do not match the cell's dimensions

    Example:
        ```python
        import numpy as np
        from casemark import nn

        cell = nn.GruParams(3, 4, nn.make_rng(0))
        h_next, cache = nn.gru_step(np.ones(3), np.zeros(4), cell)
        ```
    """
    is_vector = x.ndim == 1
    x2, h2 = np.atleast_2d(x), np.atleast_2d(h)

    if x2.shape[1] != p.input_dim:
        raise ShapeError("gru input", (x2.shape[0], p.input_dim), tuple(x.shape))
    if h2.shape != (x2.shape[0], p.hidden_dim):
        raise ShapeError("gru hidden", (x2.shape[0], p.hidden_dim), tuple(h.shape))

    z = sigmoid(x2 @ p.W_z.value.T + h2 @ p.U_z.value.T + p.b_z.value)
    r = sigmoid(x2 @ p.W_r.value.T + h2 @ p.U_r.value.T + p.b_r.value)
    h_tilde = np.tanh(x2 @ p.W_h.value.T + (r * h2) @ p.U_h.value.T + p.b_h.value)
    h_next = (1.0 - z) * h2 + z * h_tilde

    cache = GruCache(x=x2, h=h2, z=z, r=r, h_tilde=h_tilde, is_vector=is_vector)
    return (h_next[0] if is_vector else h_next), cache


def gru_backward(
    cache: Optional[GruCache], dh_next: np.ndarray, p: GruParams
) -> Tuple[np.ndarray, np.ndarray]:
    """Backpropagates through one step, accumulating into the weight gradients.

    Args:
        cache: the cache returned by the matching `gru_step`
        dh_next: dL/dh' with the shape of h'
        p: the cell weights used in the forward step

    Returns:
        a tuple (dL/dx, dL/dh)

    Raises:
        MissingCacheError: no forward cache was given
    """
    if cache is None:
        raise MissingCacheError("gru_step")

    x, h, z, r, h_tilde = cache.x, cache.h, cache.z, cache.r, cache.h_tilde
    g = np.atleast_2d(dh_next)

    dz = g * (h_tilde - h)
    dh = g * (1.0 - z)
    da_h = g * z * (1.0 - h_tilde**2)

    p.W_h.accumulate(da_h.T @ x)
    p.U_h.accumulate(da_h.T @ (r * h))
    p.b_h.accumulate(da_h.sum(axis=0))

    d_rh = da_h @ p.U_h.value
    dr = d_rh * h
    dh += d_rh * r
    dx = da_h @ p.W_h.value

    da_z = dz * z * (1.0 - z)
    da_r = dr * r * (1.0 - r)

    p.W_z.accumulate(da_z.T @ x)
    p.U_z.accumulate(da_z.T @ h)
    p.b_z.accumulate(da_z.sum(axis=0))
    p.W_r.accumulate(da_r.T @ x)
    p.U_r.accumulate(da_r.T @ h)
    p.b_r.accumulate(da_r.sum(axis=0))

    dx += da_z @ p.W_z.value + da_r @ p.W_r.value
    dh += da_z @ p.U_z.value + da_r @ p.U_r.value

    if cache.is_vector:
        return dx[0], dh[0]
    return dx, dh
