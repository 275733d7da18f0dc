"""Minimal deterministic neural-network substrate.

Dense layers, embeddings, a GRU cell with an exact backward pass, softmax cross-entropy,
categorical sampling and Adam, all on 64-bit numpy arrays.
"""
from .params import Param, check_shape, init_uniform
from .functional import sigmoid, softmax, log_softmax, softmax_xent, entropy_grad
from .layers import Linear, Embedding
from .gru import GruParams, GruCache, gru_step, gru_backward
from .optim import Adam, adam_step
from .sampling import Rng, make_rng, rng_state, restore_rng, sample_categorical

__all__ = [
    "Param",
    "check_shape",
    "init_uniform",
    "sigmoid",
    "softmax",
    "log_softmax",
    "softmax_xent",
    "entropy_grad",
    "Linear",
    "Embedding",
    "GruParams",
    "GruCache",
    "gru_step",
    "gru_backward",
    "Adam",
    "adam_step",
    "Rng",
    "make_rng",
    "rng_state",
    "restore_rng",
    "sample_categorical",
]
