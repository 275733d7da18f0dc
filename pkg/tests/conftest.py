from typing import Callable, List, Sequence

import numpy as np
import pytest

from casemark import nn
from casemark.agents import AgentConfig
from casemark.experiment import default_config
from casemark.language import Inventory

TOY_INVENTORY = Inventory(n_amb=2, n_unamb=3, n_actions=2)
SMALL_INVENTORY = Inventory(n_amb=3, n_unamb=3, n_actions=2)
TINY_AGENT = AgentConfig(meaning_dim=3, word_dim=4, hidden_dim=5, max_len=6, init_scale=0.5)


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run the statistical checks"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def numerical_grad(f: Callable[[], float], array: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central differences of `f` with respect to every entry of `array`, perturbed in place."""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        original = array[idx]
        array[idx] = original + eps
        plus = f()
        array[idx] = original - eps
        minus = f()
        array[idx] = original
        grad[idx] = (plus - minus) / (2 * eps)
    return grad


def assert_grad_close(analytic: np.ndarray, numeric: np.ndarray, rtol: float = 1e-4):
    """Relative error measured against the larger of the two norms."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
    assert np.linalg.norm(analytic - numeric) / scale < rtol


def toy_config(out_dir: str, **overrides):
    """A configuration small enough to run two pairs in seconds."""
    raw = {
        "n_pairs": 2,
        "out_dir": out_dir,
        "inventory": dict(TOY_INVENTORY),
        "agent": {"meaning_dim": 3, "word_dim": 6, "hidden_dim": 8, "max_len": 5},
        "sl": {"epochs": 3, "batch_size": 8},
        "rl": {
            "inter_turns": 6,
            "meanings_per_turn": 16,
            "batch_size": 8,
            "self_play_interval": 3,
            "eval_interval": 2,
        },
    }
    raw.update(overrides)
    return default_config(**raw)


def params_snapshot(params: Sequence[nn.Param]) -> List[np.ndarray]:
    return [p.value.copy() for p in params]
