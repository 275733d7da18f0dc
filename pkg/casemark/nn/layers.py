"""Dense linear maps and embedding lookups.

Layers hold [`Param`][casemark.nn.params.Param]s but no activations: `forward` is pure and
`backward` takes the forward input explicitly, so one layer can be applied at many
time steps without its caches getting mixed up.
"""
from typing import List

import numpy as np

from casemark.errors import ShapeError
from .params import Param, init_uniform


class Linear:
    """Affine map y = x Wᵀ + b.

    Args:
        in_dim: size of the input
        out_dim: size of the output
        rng: generator for the uniform weight initialisation
        name: prefix for the parameter names
        init_scale: weights are drawn from [-init_scale, init_scale]; biases start at zero
    """

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        name: str = "linear",
        init_scale: float = 0.1,
    ):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = Param(init_uniform(rng, (out_dim, in_dim), init_scale), f"{name}.weight")
        self.bias = Param(np.zeros(out_dim), f"{name}.bias")

    def params(self) -> List[Param]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Applies the map to a (B, in_dim) batch or a single vector."""
        if x.shape[-1] != self.in_dim:
            raise ShapeError(self.weight.name, (..., self.in_dim), tuple(x.shape))
        return x @ self.weight.value.T + self.bias.value

    def backward(self, x: np.ndarray, dy: np.ndarray) -> np.ndarray:
        """Accumulates the parameter gradients and returns dL/dx.

        Args:
            x: the input that was given to `forward`
            dy: the gradient of the loss with respect to the output
        """
        x2, dy2 = np.atleast_2d(x), np.atleast_2d(dy)
        self.weight.accumulate(dy2.T @ x2)
        self.bias.accumulate(dy2.sum(axis=0))
        dx = dy2 @ self.weight.value
        return dx if x.ndim > 1 else dx[0]


class Embedding:
    """A lookup table of row vectors.

    Args:
        num_rows: number of ids
        dim: size of each vector
        rng: generator for the uniform initialisation
        name: the parameter name
        init_scale: rows are drawn from [-init_scale, init_scale]
    """

    def __init__(
        self,
        num_rows: int,
        dim: int,
        rng: np.random.Generator,
        name: str = "embedding",
        init_scale: float = 0.1,
    ):
        self.num_rows = num_rows
        self.dim = dim
        self.table = Param(init_uniform(rng, (num_rows, dim), init_scale), name)

    def params(self) -> List[Param]:
        return [self.table]

    def forward(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.num_rows):
            raise ShapeError(self.table.name, (f"ids < {self.num_rows}",), tuple(ids.shape))
        return self.table.value[ids]

    def backward(self, ids: np.ndarray, dy: np.ndarray):
        """Scatters `dy` into the gradient rows selected by `ids`."""
        grad = np.zeros_like(self.table.value)
        np.add.at(grad, np.asarray(ids, dtype=np.int64), dy)
        self.table.accumulate(grad)

    def score(self, x: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Dot products of a (B, dim) batch with the selected rows: (B, len(rows)) logits."""
        if x.shape[-1] != self.dim:
            raise ShapeError(self.table.name, (..., self.dim), tuple(x.shape))
        return x @ self.forward(rows).T

    def score_backward(self, x: np.ndarray, rows: np.ndarray, dy: np.ndarray) -> np.ndarray:
        """Accumulates the table gradient of `score` and returns dL/dx.

        Args:
            x: the batch that was given to `score`
            rows: the rows it was scored against
            dy: (B, len(rows)) gradient of the loss with respect to the logits
        """
        self.backward(rows, dy.T @ x)
        return dy @ self.forward(rows)
