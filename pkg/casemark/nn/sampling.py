"""Seeded randomness.

All randomness in casemark flows through `numpy.random.Generator` instances backed by
the Philox-4x64 counter-based bit generator, seeded through `numpy.random.SeedSequence`.
Philox is a fixed, documented algorithm, so a given seed yields the same draw sequence
on every platform numpy supports.
"""
from typing import Any, Dict, Union

import numpy as np

from .functional import softmax

Rng = np.random.Generator


def make_rng(*entropy: int) -> Rng:
    """Creates a Philox-backed generator from one or more integer seeds.

    Args:
        entropy: integers mixed into the seed, e.g. `make_rng(base_seed, pair_id)`

    Returns:
        a new `numpy.random.Generator`

    Example:
        ```python
        from casemark import nn

        rng = nn.make_rng(42)
        rng.random()
        ```
    """
    seed_sequence = np.random.SeedSequence([int(v) for v in entropy])
    return np.random.Generator(np.random.Philox(seed_sequence))


def rng_state(rng: Rng) -> Dict[str, Any]:
    """A JSON-friendly snapshot of the generator's state."""
    state = rng.bit_generator.state
    return _to_builtin(state)


def restore_rng(state: Dict[str, Any]) -> Rng:
    """Rebuilds a Philox generator from a snapshot taken by `rng_state`."""
    bit_generator = np.random.Philox()
    bit_generator.state = _from_builtin(state)
    return np.random.Generator(bit_generator)


def sample_categorical(logits: np.ndarray, rng: Rng) -> Union[int, np.ndarray]:
    """Draws an index from softmax(logits) by inverting the cumulative distribution.

    Args:
        logits: a vector of length V, or a (B, V) matrix for B independent draws
        rng: the generator to draw uniforms from

    Returns:
        an int for a vector of logits, or an array of B ints for a matrix
    """
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    probs = softmax(np.atleast_2d(logits))
    uniforms = rng.random((probs.shape[0], 1))
    picks = np.sum(np.cumsum(probs, axis=1) < uniforms, axis=1)
    picks = np.minimum(picks, probs.shape[1] - 1)

    if single:
        return int(picks[0])
    return picks


def _to_builtin(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _to_builtin(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return {"__ndarray__": [int(v) for v in value.tolist()], "dtype": str(value.dtype)}
    if isinstance(value, np.integer):
        return int(value)
    return value


def _from_builtin(value: Any) -> Any:
    if isinstance(value, dict):
        if "__ndarray__" in value:
            return np.array(value["__ndarray__"], dtype=value["dtype"])
        return {k: _from_builtin(v) for k, v in value.items()}
    return value
