"""Speaker and listener networks sharing one set of embeddings.

An agent speaks with a linear-to-GRU decoder and listens with a GRU-to-linear encoder.
Both directions read the same word and meaning embedding tables: the speaker starts from
the meaning embeddings and the listener scores its guesses against them. A gradient step
taken while speaking is visible the next time the agent listens, and vice versa.

Everything here works on minibatches: a batch of B meanings is a (B, 3) array of
embedding row ids `[action_row, agent, patient]`, and utterances are padded to a common
length inside the forward passes.

Typical Usage:

    ```python
    import casemark as cm

    agent = cm.Agent(cm.Inventory(), cm.AgentConfig(), cm.nn.make_rng(1))
    record = cm.speak(agent, cm.Meaning(action=0, agent=0, patient=12), cm.DecodeMode.GREEDY)
    print(cm.predict_meaning(cm.listen(agent, record.utterance)))
    ```
"""
import io
import json
import logging
import zipfile
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import funml as ml

from casemark.errors import CasemarkError, ShapeError
from casemark.language import DEFAULT_INVENTORY, Inventory, Meaning, Utterance
from casemark.nn import (
    Embedding,
    GruCache,
    GruParams,
    Linear,
    Param,
    Rng,
    entropy_grad,
    gru_backward,
    gru_step,
    log_softmax,
    make_rng,
    restore_rng,
    rng_state,
    sample_categorical,
    softmax,
    softmax_xent,
)
from casemark.utils import PathLike, atomic_write_bytes

_logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 2


@ml.record
class AgentConfig:
    """Sizes of an agent's networks.

    Args:
        meaning_dim: size of each meaning embedding (three are concatenated)
        word_dim: size of each word embedding
        hidden_dim: size of both GRU hidden states
        max_len: most external tokens a speaker may emit
        init_scale: weights start uniform in [-init_scale, init_scale]
    """

    meaning_dim: int = 8
    word_dim: int = 16
    hidden_dim: int = 16
    max_len: int = 10
    init_scale: float = 0.1


class DecodeMode(ml.Enum):
    """How a speaker picks each next token.

    Variants:
        - GREEDY: the most probable token, lowest id on ties
        - SAMPLE: a draw from the softmax
    """

    GREEDY = None
    SAMPLE = None


class SpeakRecord(NamedTuple):
    """An utterance and the log-probability of every token chosen while producing it.

    `log_probs` includes the end-of-sequence token when one was emitted.
    """

    utterance: Utterance
    log_probs: Tuple[float, ...]


class _Step(NamedTuple):
    input_ids: np.ndarray
    cache: GruCache
    hidden: np.ndarray
    logits: np.ndarray


class Rollout(NamedTuple):
    """A batch of free-running speaker decodes, with what REINFORCE needs to backpropagate.

    Attributes:
        slots: (B, 3) meaning embedding rows
        encoded: (B, 3 * meaning_dim) concatenated meaning embeddings
        steps: one entry per decoding step
        tokens: (B, T) chosen tokens, eos-padded after the end
        active: (B, T) whether the row was still decoding at each step
        log_probs: (B, T) log-probabilities of the chosen tokens, 0 where inactive
        utterances: the external token sequences, eos stripped
    """

    slots: np.ndarray
    encoded: np.ndarray
    steps: List[_Step]
    tokens: np.ndarray
    active: np.ndarray
    log_probs: np.ndarray
    utterances: List[Utterance]

    def records(self) -> List[SpeakRecord]:
        return [
            SpeakRecord(
                utterance=u,
                log_probs=tuple(float(v) for v in self.log_probs[i][self.active[i]]),
            )
            for i, u in enumerate(self.utterances)
        ]


class ListenTrace(NamedTuple):
    """The listener's forward pass over a batch of utterances.

    Attributes:
        token_ids: (B, L) padded input tokens
        lengths: (B,) utterance lengths
        caches: one GRU cache per position
        final_hidden: (B, hidden_dim) hidden state after each row's last token
        logits: action, agent and patient logits, each (B, n)
    """

    token_ids: np.ndarray
    lengths: np.ndarray
    caches: List[GruCache]
    final_hidden: np.ndarray
    logits: Tuple[np.ndarray, np.ndarray, np.ndarray]

    def distributions(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(softmax(v) for v in self.logits)


def meaning_slots(meanings: Sequence[Meaning], inv: Inventory) -> np.ndarray:
    """Maps meanings onto meaning-embedding rows ordered (action, agent, patient).

    This is the single place deciding how a meaning is presented to the speaker: the
    role of each entity is carried by its slot position.
    """
    return np.array(
        [[inv.n_entities + m.action, m.agent, m.patient] for m in meanings],
        dtype=np.int64,
    ).reshape(-1, 3)


def meaning_targets(meanings: Sequence[Meaning]) -> np.ndarray:
    """(B, 3) array of [action, agent, patient] class indices for the listener heads."""
    return np.array(
        [[m.action, m.agent, m.patient] for m in meanings], dtype=np.int64
    ).reshape(-1, 3)


class Agent:
    """One agent: a speaking network and a listening network with tied embeddings.

    Args:
        inv: the inventory fixing vocabulary and head sizes
        cfg: network sizes
        rng: the agent's own generator; used for initialisation and kept for
            shuffling its training data

    Attributes:
        meaning_emb: rows for entities then actions, meaning_dim wide
        word_emb: rows for the external vocabulary plus eos, word_dim wide
        speaker_init: maps the concatenated meaning embeddings to the first hidden state
        speaker_gru: the decoder cell
        speaker_out: hidden state to next-token logits (vocabulary plus eos)
        listener_gru: the encoder cell
        listener_action, listener_agent, listener_patient: hidden state to a meaning_dim
            query per slot; the query is scored against the action or entity rows of
            meaning_emb
    """

    def __init__(
        self,
        inv: Inventory = DEFAULT_INVENTORY,
        cfg: Optional[AgentConfig] = None,
        rng: Optional[Rng] = None,
    ):
        self.inv = inv
        self.cfg = AgentConfig() if cfg is None else cfg
        self.rng = make_rng(0) if rng is None else rng

        c, r, scale = self.cfg, self.rng, self.cfg.init_scale
        n_out = inv.vocab_size + 1

        self.meaning_emb = Embedding(
            inv.n_entities + inv.n_actions, c.meaning_dim, r, "meaning_emb", scale
        )
        self.word_emb = Embedding(n_out, c.word_dim, r, "word_emb", scale)
        self.speaker_init = Linear(
            3 * c.meaning_dim, c.hidden_dim, r, "speaker_init", scale
        )
        self.speaker_gru = GruParams(c.word_dim, c.hidden_dim, r, "speaker_gru", scale)
        self.speaker_out = Linear(c.hidden_dim, n_out, r, "speaker_out", scale)
        self.listener_gru = GruParams(
            c.word_dim, c.hidden_dim, r, "listener_gru", scale
        )
        self.listener_action = Linear(
            c.hidden_dim, c.meaning_dim, r, "listener_action", scale
        )
        self.listener_agent = Linear(
            c.hidden_dim, c.meaning_dim, r, "listener_agent", scale
        )
        self.listener_patient = Linear(
            c.hidden_dim, c.meaning_dim, r, "listener_patient", scale
        )
        entity_rows = np.arange(inv.n_entities, dtype=np.int64)
        action_rows = inv.n_entities + np.arange(inv.n_actions, dtype=np.int64)
        self._head_rows = (action_rows, entity_rows, entity_rows)

    def speaker_params(self) -> List[Param]:
        return [
            *self.meaning_emb.params(),
            *self.word_emb.params(),
            *self.speaker_init.params(),
            *self.speaker_gru.params(),
            *self.speaker_out.params(),
        ]

    def listener_params(self) -> List[Param]:
        return [
            *self.word_emb.params(),
            *self.meaning_emb.params(),
            *self.listener_gru.params(),
            *self.listener_action.params(),
            *self.listener_agent.params(),
            *self.listener_patient.params(),
        ]

    def params(self) -> List[Param]:
        """Every parameter once, speaker path first."""
        seen, unique = set(), []
        for p in self.speaker_params() + self.listener_params():
            if id(p) not in seen:
                seen.add(id(p))
                unique.append(p)
        return unique

    def zero_grad(self):
        for p in self.params():
            p.zero_grad()

    # speaking

    def encode(self, slots: np.ndarray) -> np.ndarray:
        """Concatenates the embeddings of the (B, 3) slot rows into (B, 3 * meaning_dim)."""
        return self.meaning_emb.forward(slots).reshape(slots.shape[0], -1)

    def speaker_loss(
        self, meanings: Sequence[Meaning], utterances: Sequence[Utterance]
    ) -> float:
        """Teacher-forced cross-entropy of the reference utterances, with gradients.

        The target of every row is its utterance followed by eos; the first input is the
        eos embedding. The loss is the per-utterance sum of token losses averaged over
        the batch, and its gradient is accumulated into the speaker-path parameters.

        Args:
            meanings: B meanings
            utterances: the B reference utterances

        Returns:
            the loss value
        """
        inv, batch = self.inv, len(meanings)
        targets = [tuple(u) + (inv.eos,) for u in utterances]
        n_steps = max(len(t) for t in targets)

        target_ids = np.full((batch, n_steps), inv.eos, dtype=np.int64)
        mask = np.zeros((batch, n_steps))
        for i, t in enumerate(targets):
            target_ids[i, : len(t)] = t
            mask[i, : len(t)] = 1.0
        input_ids = np.concatenate(
            [np.full((batch, 1), inv.eos, dtype=np.int64), target_ids[:, :-1]], axis=1
        )

        slots = meaning_slots(meanings, inv)
        encoded = self.encode(slots)
        h = self.speaker_init.forward(encoded)
        steps, total = [], 0.0
        dlogits = []

        for t in range(n_steps):
            x_ids = input_ids[:, t]
            h, cache = gru_step(self.word_emb.forward(x_ids), h, self.speaker_gru)
            logits = self.speaker_out.forward(h)
            loss, grad = softmax_xent(logits, target_ids[:, t], mask[:, t] / batch)
            total += loss
            steps.append(_Step(x_ids, cache, h, logits))
            dlogits.append(grad)

        self._speaker_backward(slots, encoded, steps, dlogits)
        return total

    def rollout(
        self, meanings: Sequence[Meaning], mode: DecodeMode, rng: Optional[Rng] = None
    ) -> Rollout:
        """Decodes utterances for a batch of meanings without teacher forcing.

        Decoding stops per row at eos or after `max_len` external tokens, and for the
        whole batch once every row has stopped.

        Args:
            meanings: B meanings
            mode: greedy or sampled decoding
            rng: the generator for sampled decoding

        Returns:
            the decodes together with what `reinforce_backward` needs
        """
        inv, batch = self.inv, len(meanings)
        slots = meaning_slots(meanings, inv)
        encoded = self.encode(slots)
        h = self.speaker_init.forward(encoded)

        x_ids = np.full(batch, inv.eos, dtype=np.int64)
        running = np.ones(batch, dtype=bool)
        steps, tokens, active, log_probs = [], [], [], []

        choose = (
            ml.match(mode)
            .case(DecodeMode.GREEDY, do=lambda: lambda v: np.argmax(v, axis=1))
            .case(DecodeMode.SAMPLE, do=lambda: lambda v: sample_categorical(v, rng))
        )()

        for _ in range(self.cfg.max_len):
            if not running.any():
                break
            h, cache = gru_step(self.word_emb.forward(x_ids), h, self.speaker_gru)
            logits = self.speaker_out.forward(h)
            picks = np.asarray(choose(logits), dtype=np.int64)
            picks = np.where(running, picks, inv.eos)

            steps.append(_Step(x_ids, cache, h, logits))
            tokens.append(picks)
            active.append(running.copy())
            chosen_lp = log_softmax(logits)[np.arange(batch), picks]
            log_probs.append(np.where(running, chosen_lp, 0.0))

            running = running & (picks != inv.eos)
            x_ids = picks

        tokens = np.stack(tokens, axis=1) if tokens else np.zeros((batch, 0), np.int64)
        active = np.stack(active, axis=1) if active else np.zeros((batch, 0), bool)
        log_probs = np.stack(log_probs, axis=1) if log_probs else np.zeros((batch, 0))

        utterances = []
        for row in tokens:
            ends = np.flatnonzero(row == inv.eos)
            stop = int(ends[0]) if ends.size else len(row)
            utterances.append(tuple(int(v) for v in row[:stop]))

        return Rollout(slots, encoded, steps, tokens, active, log_probs, utterances)

    def reinforce_backward(
        self, rollout: Rollout, advantages: np.ndarray, entropy_coef: float = 0.0
    ):
        """Accumulates the policy gradient of a rollout into the speaker-path parameters.

        The loss is `-(1/B) Σ_b advantages[b] Σ_t log π(token_bt)`, minus
        `entropy_coef` times the batch mean of each row's per-step mean entropy. The
        entropy is averaged over a row's own steps so the bonus does not grow with length.

        Args:
            rollout: a rollout produced by this agent
            advantages: (B,) reward minus baseline for each row
            entropy_coef: weight of the entropy bonus
        """
        batch = rollout.tokens.shape[0]
        n_active = np.maximum(rollout.active.sum(axis=1), 1)
        dlogits = []
        for t, step in enumerate(rollout.steps):
            mask = rollout.active[:, t].astype(float)
            _, grad = softmax_xent(
                step.logits, rollout.tokens[:, t], advantages * mask / batch
            )
            if entropy_coef:
                _, d_entropy = entropy_grad(step.logits)
                row_weight = mask / (batch * n_active)
                grad = grad - entropy_coef * d_entropy * row_weight[:, None]
            dlogits.append(grad)

        self._speaker_backward(rollout.slots, rollout.encoded, rollout.steps, dlogits)

    def _speaker_backward(
        self,
        slots: np.ndarray,
        encoded: np.ndarray,
        steps: List[_Step],
        dlogits: List[np.ndarray],
    ):
        dh = np.zeros((slots.shape[0], self.cfg.hidden_dim))
        for step, grad in zip(reversed(steps), reversed(dlogits)):
            dh = dh + self.speaker_out.backward(step.hidden, grad)
            dx, dh = gru_backward(step.cache, dh, self.speaker_gru)
            self.word_emb.backward(step.input_ids, dx)

        d_encoded = self.speaker_init.backward(encoded, dh)
        self.meaning_emb.backward(
            slots.reshape(-1), d_encoded.reshape(-1, self.cfg.meaning_dim)
        )

    # listening

    def listen_batch(self, utterances: Sequence[Utterance]) -> ListenTrace:
        """Encodes a batch of utterances and applies the three heads.

        Rows with an empty utterance get all-zero logits, i.e. uniform distributions.

        Raises:
            ShapeError: a token lies outside the external vocabulary
        """
        inv, batch = self.inv, len(utterances)
        lengths = np.array([len(u) for u in utterances], dtype=np.int64)
        n_steps = int(lengths.max()) if batch else 0

        token_ids = np.full((batch, n_steps), inv.eos, dtype=np.int64)
        for i, u in enumerate(utterances):
            token_ids[i, : len(u)] = u
        real = np.arange(n_steps)[None, :] < lengths[:, None]
        if np.any(token_ids[real] >= inv.vocab_size) or np.any(token_ids[real] < 0):
            raise ShapeError("utterance tokens", (f"< {inv.vocab_size}",), tuple(lengths))

        h = np.zeros((batch, self.cfg.hidden_dim))
        final = np.zeros_like(h)
        caches = []
        for t in range(n_steps):
            h, cache = gru_step(
                self.word_emb.forward(token_ids[:, t]), h, self.listener_gru
            )
            caches.append(cache)
            final[lengths - 1 == t] = h[lengths - 1 == t]

        empty = lengths == 0
        logits = []
        for head, rows in zip(self._heads(), self._head_rows):
            out = self.meaning_emb.score(head.forward(final), rows)
            out[empty] = 0.0
            logits.append(out)

        return ListenTrace(token_ids, lengths, caches, final, tuple(logits))

    def listener_backward(
        self, trace: ListenTrace, targets: np.ndarray, weights: np.ndarray
    ) -> float:
        """Accumulates the gradient of the weighted head cross-entropies.

        The loss is `Σ_b weights[b] (CE_action + CE_agent + CE_patient)`; rows holding an
        empty utterance are left out.

        Args:
            trace: a forward pass of this agent's listener
            targets: (B, 3) [action, agent, patient] indices
            weights: (B,) row weights, e.g. 1/B for a batch mean

        Returns:
            the loss value
        """
        weights = np.where(trace.lengths > 0, weights, 0.0)
        total = 0.0
        dh_final = np.zeros_like(trace.final_hidden)

        for k, (head, rows) in enumerate(zip(self._heads(), self._head_rows)):
            loss, grad = softmax_xent(trace.logits[k], targets[:, k], weights)
            total += loss
            query = head.forward(trace.final_hidden)
            d_query = self.meaning_emb.score_backward(query, rows, grad)
            dh_final += head.backward(trace.final_hidden, d_query)

        dh = np.zeros_like(dh_final)
        for t in reversed(range(len(trace.caches))):
            ends_here = trace.lengths - 1 == t
            dh = dh + np.where(ends_here[:, None], dh_final, 0.0)
            dx, dh = gru_backward(trace.caches[t], dh, self.listener_gru)
            self.word_emb.backward(trace.token_ids[:, t], dx)

        return total

    def _heads(self) -> Tuple[Linear, Linear, Linear]:
        return self.listener_action, self.listener_agent, self.listener_patient


def speak(
    a: Agent, m: Meaning, mode: DecodeMode, rng: Optional[Rng] = None
) -> SpeakRecord:
    """Produces an utterance for one meaning.

    Args:
        a: the speaking agent
        m: the meaning to convey
        mode: greedy or sampled decoding
        rng: the generator for sampled decoding

    Returns:
        the utterance (eos stripped) and the log-probability of each chosen token
    """
    return a.rollout([m], mode, rng).records()[0]


def listen(a: Agent, u: Utterance) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The listener's action, agent and patient distributions for one utterance.

    An empty utterance yields uniform distributions.
    """
    if len(u) == 0:
        _logger.debug("empty utterance, answering with uniform distributions")
    trace = a.listen_batch([tuple(u)])
    return tuple(d[0] for d in trace.distributions())


def predict_meaning(distributions: Sequence[np.ndarray]) -> Meaning:
    """Takes the argmax of each distribution; ties go to the lowest id."""
    action, agent, patient = (int(np.argmax(d)) for d in distributions)
    return Meaning(action=action, agent=agent, patient=patient)


def predict_meanings(distributions: Sequence[np.ndarray]) -> np.ndarray:
    """Batched `predict_meaning`: (B, 3) array of [action, agent, patient]."""
    return np.stack([np.argmax(d, axis=1) for d in distributions], axis=1)


# checkpoints


def save_agent(agent: Agent, path: PathLike):
    """Writes every parameter, its Adam state and the agent's generator state to an npz file.

    Entries are stored with a fixed timestamp so equal agents give equal files.
    """
    meta = {
        "version": CHECKPOINT_VERSION,
        "agent_config": json.loads(ml.to_json(agent.cfg)),
        "inventory": json.loads(ml.to_json(agent.inv)),
        "rng_state": rng_state(agent.rng),
    }
    arrays = {"meta": np.array(json.dumps(meta, sort_keys=True))}
    for p in agent.params():
        arrays[f"{p.name}/value"] = p.value
        arrays[f"{p.name}/adam_m"] = p.adam_m
        arrays[f"{p.name}/adam_v"] = p.adam_v
        arrays[f"{p.name}/step_count"] = np.array(p.step_count, dtype=np.int64)

    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", compression=zipfile.ZIP_STORED) as archive:
        for key, array in arrays.items():
            entry = io.BytesIO()
            np.lib.format.write_array(entry, np.asarray(array), allow_pickle=False)
            info = zipfile.ZipInfo(f"{key}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            archive.writestr(info, entry.getvalue())

    atomic_write_bytes(path, buffer.getvalue())


def load_agent(path: PathLike) -> Agent:
    """Reads an agent written by `save_agent`.

    Raises:
        CasemarkError: the file has an unknown version or lacks a parameter
    """
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise CasemarkError(f"unsupported checkpoint version {meta.get('version')}")

        agent = Agent(
            Inventory(**meta["inventory"]),
            AgentConfig(**meta["agent_config"]),
            make_rng(0),
        )
        for p in agent.params():
            try:
                p.value = np.array(data[f"{p.name}/value"], dtype=np.float64)
                p.adam_m = np.array(data[f"{p.name}/adam_m"], dtype=np.float64)
                p.adam_v = np.array(data[f"{p.name}/adam_v"], dtype=np.float64)
                p.step_count = int(data[f"{p.name}/step_count"])
            except KeyError:
                raise CasemarkError(f"{path} has no entry for parameter {p.name}")
            p.zero_grad()

    agent.rng = restore_rng(meta["rng_state"])
    return agent
