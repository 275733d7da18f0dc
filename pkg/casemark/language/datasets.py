"""Train/test splits and the constrained supervised-learning subset."""
import math
from typing import List, Set, Tuple

import numpy as np

from casemark.errors import UnsatisfiableConstraintError
from .meanings import Meaning

TEST_FRACTION = 0.2
SL_SUBSET_FRACTION = 0.667
MAX_RESAMPLE_ATTEMPTS = 1000


def split_dataset(
    meanings: List[Meaning],
    rng: np.random.Generator,
    test_fraction: float = TEST_FRACTION,
) -> Tuple[List[Meaning], List[Meaning]]:
    """Partitions meanings uniformly at random into train and test lists.

    The input is sorted canonically before shuffling, so the split depends only on the
    set of meanings and the generator state. 1520 meanings give 1216/304.

    Returns:
        a tuple (train, test), each sorted canonically
    """
    canonical = sorted(meanings)
    n_test = int(round(test_fraction * len(canonical)))
    order = rng.permutation(len(canonical))
    test_idx = set(int(i) for i in order[:n_test])

    train = [m for i, m in enumerate(canonical) if i not in test_idx]
    test = [m for i, m in enumerate(canonical) if i in test_idx]
    return train, test


def coverage(meanings: List[Meaning]) -> Set[Tuple[str, int]]:
    """The (role, id) pairs seen in a meaning list: every agent, patient and action."""
    seen = set()
    for m in meanings:
        seen.add(("agent", m.agent))
        seen.add(("patient", m.patient))
        seen.add(("action", m.action))
    return seen


def resample_sl_subset(
    train: List[Meaning],
    rng: np.random.Generator,
    fraction: float = SL_SUBSET_FRACTION,
    max_attempts: int = MAX_RESAMPLE_ATTEMPTS,
) -> List[Meaning]:
    """Draws the supervised-learning subset of the train split.

    `floor(fraction * len(train))` meanings are drawn without replacement, redrawing until
    every entity appears in every role it has in `train` and every action appears.

    Args:
        train: the train split
        rng: source of the draws
        fraction: share of the train split to keep
        max_attempts: how many draws to try before giving up

    Returns:
        the subset, sorted canonically

    Raises:
        UnsatisfiableConstraintError: no valid subset was found within max_attempts
    """
    canonical = sorted(train)
    size = int(math.floor(fraction * len(canonical)))
    required = coverage(canonical)

    for _ in range(max_attempts):
        picks = rng.choice(len(canonical), size=size, replace=False)
        subset = sorted(canonical[int(i)] for i in picks)
        if coverage(subset) == required:
            return subset

    raise UnsatisfiableConstraintError("all-seen-entities/actions", max_attempts)
