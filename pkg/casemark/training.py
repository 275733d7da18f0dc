"""Supervised learning on a reference corpus, then paired reinforcement learning.

Typical Usage:

    ```python
    import casemark as cm

    curve = cm.train_supervised(agent, corpus, cm.SlConfig())
    turns = cm.run_rl((first, second), train, cm.RlConfig(), cm.nn.make_rng(0, 3))
    ```
"""
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import funml as ml

from casemark.agents import Agent, DecodeMode, meaning_targets, predict_meanings
from casemark.language import Meaning, Utterance
from casemark.nn import Adam, Rng, sample_categorical

_logger = logging.getLogger(__name__)

Pair = Tuple[Agent, Agent]

LISTENER_UPDATES = ("supervised", "reinforce")


@ml.record
class SlConfig:
    """Supervised phase settings.

    Args:
        epochs: passes over the corpus
        learning_rate: Adam step size
        batch_size: meanings per update
        subset_fraction: share of the train split each agent learns from
        grad_clip: global gradient norm limit, 0 to disable
    """

    epochs: int = 60
    learning_rate: float = 0.01
    batch_size: int = 32
    subset_fraction: float = 0.667
    grad_clip: float = 0.0


@ml.record
class RlConfig:
    """Interaction phase settings.

    Args:
        inter_turns: number of turns
        learning_rate: Adam step size
        meanings_per_turn: meanings drawn from the train split each turn
        batch_size: games per update
        self_play_interval: every this many turns is a self-communication turn
        eval_interval: held-out accuracy is recorded every this many turns
        exact_match_reward: reward 1 only for a fully recovered meaning
        listener_update: "supervised" (cross-entropy to the true meaning) or
            "reinforce" (sampled prediction weighted by the advantage)
        entropy_coef: weight of the speaker's per-message mean entropy bonus, 0 to disable
        grad_clip: global gradient norm limit, 0 to disable
        use_baseline: subtract the batch-mean reward from each reward
    """

    inter_turns: int = 200
    learning_rate: float = 0.005
    meanings_per_turn: int = 320
    batch_size: int = 32
    self_play_interval: int = 5
    eval_interval: int = 10
    exact_match_reward: bool = False
    listener_update: str = "supervised"
    entropy_coef: float = 0.1
    grad_clip: float = 0.0
    use_baseline: bool = True


@ml.record
class EpochLog:
    """Mean losses over the minibatches of one supervised epoch."""

    epoch: int
    speaker_loss: float
    listener_loss: float


@ml.record
class TurnLog:
    """Summary of one interaction turn.

    Args:
        turn: 1-based turn index
        mean_reward: mean reward over the turn's games
        mean_acc: share of games where the whole meaning was recovered
        speaker_agent: "0" or "1" for the agent speaking, "self" on self-communication turns
        self_play: whether this was a self-communication turn
    """

    turn: int
    mean_reward: float
    mean_acc: float
    speaker_agent: str
    self_play: bool


def _minibatches(n: int, size: int) -> List[slice]:
    return [slice(start, min(start + size, n)) for start in range(0, n, size)]


def _reset_optimizer_state(agent: Agent):
    for p in agent.params():
        p.zero_grad()
        p.reset_moments()


def train_supervised(
    agent: Agent,
    corpus: Sequence[Tuple[Meaning, Utterance]],
    cfg: SlConfig,
    rng: Optional[Rng] = None,
) -> List[EpochLog]:
    """Teaches an agent to speak and understand a reference corpus.

    Every epoch the corpus is shuffled and cut into minibatches. For each minibatch
    the speaker's teacher-forced loss and the listener's three-head loss are
    backpropagated together, so the shared embeddings receive both gradients, and one
    Adam step updates every parameter. Adam starts from fresh moments.

    Args:
        agent: the agent to train, updated in place
        corpus: reference (meaning, utterance) pairs
        cfg: the phase settings
        rng: the generator used for shuffling; defaults to the agent's own

    Returns:
        one EpochLog per epoch

    Raises:
        ValueError: the corpus is empty
    """
    if not corpus:
        raise ValueError("cannot train on an empty corpus")

    rng = agent.rng if rng is None else rng
    _reset_optimizer_state(agent)
    optimizer = Adam(agent.params(), cfg.learning_rate, cfg.grad_clip)
    curve = []

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(corpus))
        speaker_losses, listener_losses = [], []

        for batch in _minibatches(len(corpus), cfg.batch_size):
            pairs = [corpus[int(i)] for i in order[batch]]
            meanings = [m for m, _ in pairs]
            utterances = [u for _, u in pairs]
            weights = np.full(len(pairs), 1.0 / len(pairs))

            speaker_losses.append(agent.speaker_loss(meanings, utterances))
            trace = agent.listen_batch(utterances)
            listener_losses.append(
                agent.listener_backward(trace, meaning_targets(meanings), weights)
            )
            optimizer.step()

        curve.append(
            EpochLog(
                epoch=epoch,
                speaker_loss=float(np.mean(speaker_losses)),
                listener_loss=float(np.mean(listener_losses)),
            )
        )
        _logger.debug(
            "sl epoch %d: speaker %.4f listener %.4f",
            epoch,
            curve[-1].speaker_loss,
            curve[-1].listener_loss,
        )

    return curve


def reward(m: Meaning, m_hat: Meaning, exact: bool = False) -> float:
    """Fraction of the action, agent and patient slots recovered; 1 or 0 when `exact`."""
    hits = sum(int(a == b) for a, b in zip(m, m_hat))
    if exact:
        return float(hits == 3)
    return hits / 3.0


def batch_rewards(
    targets: np.ndarray, predictions: np.ndarray, exact: bool = False
) -> Tuple[np.ndarray, np.ndarray]:
    """Rewards and exact-match flags for (B, 3) arrays of true and predicted meanings."""
    hits = targets == predictions
    matched = hits.all(axis=1)
    rewards = matched.astype(float) if exact else hits.sum(axis=1) / 3.0
    return rewards, matched


def is_self_play_turn(turn: int, interval: int) -> bool:
    return interval > 0 and turn % interval == 0


def assign_speaker(rng: Rng) -> int:
    """Flips the fair coin deciding which agent of a pair speaks for a turn."""
    return int(rng.integers(2))


def play_games(
    speaker: Agent,
    listener: Agent,
    meanings: Sequence[Meaning],
    cfg: RlConfig,
    rng: Rng,
) -> Tuple[np.ndarray, np.ndarray]:
    """Plays one reconstruction game per meaning, updating both networks per minibatch.

    The speaker samples an utterance, the listener decodes it, and both are scored by the
    same reward. The speaker takes a REINFORCE step with the advantage `r - b`; the
    listener learns the true meaning (or, with the "reinforce" listener update, its
    sampled guess weighted by the same advantage). When `speaker is listener` one Adam
    step covers the whole agent; otherwise only the speaking path of the speaker and
    the listening path of the listener move.

    Returns:
        per-game rewards and exact-match flags
    """
    self_talk = speaker is listener
    speaker_opt = Adam(speaker.params(), cfg.learning_rate, cfg.grad_clip)
    listener_opt = Adam(listener.params(), cfg.learning_rate, cfg.grad_clip)
    all_rewards, all_matched = [], []

    for batch in _minibatches(len(meanings), cfg.batch_size):
        chunk = list(meanings[batch])
        size = len(chunk)
        targets = meaning_targets(chunk)

        rollout = speaker.rollout(chunk, DecodeMode.SAMPLE, rng)
        trace = listener.listen_batch(rollout.utterances)

        if cfg.listener_update == "reinforce":
            guesses = np.stack(
                [sample_categorical(logits, rng) for logits in trace.logits], axis=1
            )
        else:
            guesses = predict_meanings(trace.logits)

        rewards, matched = batch_rewards(targets, guesses, cfg.exact_match_reward)
        baseline = float(rewards.mean()) if cfg.use_baseline else 0.0
        advantages = rewards - baseline

        speaker.reinforce_backward(rollout, advantages, cfg.entropy_coef)
        if cfg.listener_update == "reinforce":
            listener.listener_backward(trace, guesses, advantages / size)
        else:
            listener.listener_backward(trace, targets, np.full(size, 1.0 / size))

        if self_talk:
            speaker_opt.step()
        else:
            speaker_opt.step(speaker.speaker_params())
            listener_opt.step(listener.listener_params())

        all_rewards.append(rewards)
        all_matched.append(matched)

    return np.concatenate(all_rewards), np.concatenate(all_matched)


def interaction_turn(
    pair: Pair,
    meanings: Sequence[Meaning],
    cfg: RlConfig,
    rng: Rng,
    self_play: bool,
    turn: int = 0,
) -> TurnLog:
    """Runs one turn of the interaction phase over a batch of meanings.

    On a self-communication turn each agent speaks to its own listener over all the
    meanings. Otherwise one coin flip picks the speaker for the whole turn and the other
    agent listens.

    Args:
        pair: the two agents
        meanings: the turn's meanings
        cfg: the phase settings
        rng: the pair's generator
        self_play: whether this is a self-communication turn
        turn: the turn index recorded in the log

    Returns:
        the turn's summary
    """
    if self_play:
        outcomes = [play_games(a, a, meanings, cfg, rng) for a in pair]
        speaker_agent = "self"
    else:
        k = assign_speaker(rng)
        outcomes = [play_games(pair[k], pair[1 - k], meanings, cfg, rng)]
        speaker_agent = str(k)

    rewards = np.concatenate([r for r, _ in outcomes])
    matched = np.concatenate([m for _, m in outcomes])
    log = TurnLog(
        turn=turn,
        mean_reward=float(rewards.mean()),
        mean_acc=float(matched.mean()),
        speaker_agent=speaker_agent,
        self_play=self_play,
    )
    _logger.debug(
        "turn %d (%s): reward %.4f acc %.4f",
        turn,
        speaker_agent,
        log.mean_reward,
        log.mean_acc,
    )
    return log


def sample_turn_meanings(
    train: Sequence[Meaning], size: int, rng: Rng
) -> List[Meaning]:
    """Draws a turn's meanings uniformly from the train split, without replacement when possible."""
    picks = rng.choice(len(train), size=size, replace=len(train) < size)
    return [train[int(i)] for i in picks]


def run_rl(
    pair: Pair,
    train: Sequence[Meaning],
    cfg: RlConfig,
    rng: Rng,
    on_checkpoint: Optional[Callable[[int], None]] = None,
) -> List[TurnLog]:
    """Runs the whole interaction phase.

    Turns are numbered from 1; turn t is a self-communication turn when t is a multiple
    of `self_play_interval`. Each turn draws fresh meanings from `train`. Adam moments
    are reset once at the start of the phase.

    Args:
        pair: the two supervised-trained agents, updated in place
        train: the meanings to sample from
        cfg: the phase settings
        rng: the pair's generator
        on_checkpoint: called with the turn index before turn 1, every
            `eval_interval` turns and after the last turn; must not draw from `rng`

    Returns:
        one TurnLog per turn
    """
    for agent in pair:
        _reset_optimizer_state(agent)

    if on_checkpoint is not None:
        on_checkpoint(0)

    logs = []
    for turn in range(1, cfg.inter_turns + 1):
        meanings = sample_turn_meanings(train, cfg.meanings_per_turn, rng)
        self_play = is_self_play_turn(turn, cfg.self_play_interval)
        logs.append(interaction_turn(pair, meanings, cfg, rng, self_play, turn))

        at_interval = cfg.eval_interval > 0 and turn % cfg.eval_interval == 0
        if on_checkpoint is not None and (at_interval or turn == cfg.inter_turns):
            on_checkpoint(turn)

    return logs
