"""Stateless numerical functions: activations, softmax and the cross-entropy loss."""
from typing import Optional, Tuple, Union

import numpy as np

from casemark.errors import ShapeError


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function, computed without overflow for large negative inputs."""
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax over the last axis, stabilised by subtracting the row maximum."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Log of the softmax over the last axis."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def softmax_xent(
    logits: np.ndarray,
    target: Union[int, np.ndarray],
    weights: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray]:
    """Cross-entropy between softmax(logits) and the target class, with its gradient.

    For a single vector of logits the loss is `-log softmax(logits)[target]` and the
    gradient is `softmax(logits) - onehot(target)`. For a batch of shape (B, V) with
    B targets, the per-row losses are multiplied by `weights` (default ones) and summed;
    each gradient row is scaled by its weight, so a zero weight masks the row out.

    Args:
        logits: a vector of length V or a (B, V) matrix
        target: the target index, or B target indices
        weights: optional per-row weights for batched input

    Returns:
        a tuple (loss, dL/dlogits) where the gradient has the shape of logits

    Raises:
        ShapeError: the logits are empty or a target is out of range

    Example:
        ```python
        import numpy as np
        from casemark import nn

        loss, grad = nn.softmax_xent(np.zeros(30), 4)
        # loss == ln(30)
        ```
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size == 0 or logits.shape[-1] == 0:
        raise ShapeError("logits", ("non-empty",), tuple(logits.shape))

    single = logits.ndim == 1
    batch = np.atleast_2d(logits)
    targets = np.atleast_1d(np.asarray(target, dtype=np.int64))
    n_rows, n_classes = batch.shape

    if targets.shape != (n_rows,):
        raise ShapeError("targets", (n_rows,), tuple(targets.shape))
    if np.any(targets < 0) or np.any(targets >= n_classes):
        raise ShapeError("target index", (f"< {n_classes}",), tuple(targets.tolist()))

    row_weights = np.ones(n_rows) if weights is None else np.asarray(weights, float)
    log_probs = log_softmax(batch)
    rows = np.arange(n_rows)
    losses = -log_probs[rows, targets]

    grad = np.exp(log_probs)
    grad[rows, targets] -= 1.0
    grad *= row_weights[:, None]
    loss = float(np.sum(losses * row_weights))

    if single:
        return loss, grad[0]
    return loss, grad


def entropy_grad(logits: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Entropy of softmax(logits) per row and its gradient with respect to the logits."""
    log_probs = log_softmax(logits)
    probs = np.exp(log_probs)
    entropy = -np.sum(probs * log_probs, axis=-1)
    grad = -probs * (log_probs + entropy[..., None])
    return entropy, grad
