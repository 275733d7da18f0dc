"""Corpus and lexicon files.

Corpus files are UTF-8 text, one pair per line, tab-separated:

    action_id<TAB>agent_id<TAB>patient_id<TAB>space-joined token ids

Lexicon files map token ids to display strings, one per line:

    id<TAB>display_string
"""
from typing import Dict, List, Tuple

from casemark.utils import PathLike, atomic_write_text
from .grammar import Utterance
from .meanings import DEFAULT_INVENTORY, Inventory, Meaning

_AMB_NAMES = [
    "alice",
    "bob",
    "carol",
    "dave",
    "erin",
    "frank",
    "grace",
    "heidi",
    "ivan",
    "judy",
]
_UNAMB_NAMES = [
    "cake",
    "ball",
    "apple",
    "book",
    "chair",
    "cup",
    "door",
    "hat",
    "key",
    "lamp",
]
_ACTION_NAMES = ["eat", "push", "see", "hit", "kick", "pull", "hold", "throw"]


def _pick(names: List[str], index: int, fallback: str) -> str:
    return names[index] if index < len(names) else f"{fallback}{index}"


def lexicon(inv: Inventory = DEFAULT_INVENTORY) -> Dict[int, str]:
    """Display strings for every token id, including the end-of-sequence token."""
    words = {}
    for e in inv.amb_entities:
        words[e] = _pick(_AMB_NAMES, e, "amb")
    for i, e in enumerate(inv.unamb_entities):
        words[e] = _pick(_UNAMB_NAMES, i, "unamb")
    for a in inv.actions:
        words[inv.action_token(a)] = _pick(_ACTION_NAMES, a, "act")
    words[inv.marker] = "mk"
    words[inv.eos] = "<eos>"
    return words


def display(u: Utterance, inv: Inventory = DEFAULT_INVENTORY) -> str:
    """Human-readable form of an utterance, e.g. 'alice cake mk eat'."""
    words = lexicon(inv)
    return " ".join(words.get(int(t), f"<{t}>") for t in u)


def write_corpus(path: PathLike, corpus: List[Tuple[Meaning, Utterance]]):
    lines = [
        f"{m.action}\t{m.agent}\t{m.patient}\t{' '.join(str(t) for t in u)}\n"
        for m, u in corpus
    ]
    atomic_write_text(path, "".join(lines))


def read_corpus(path: PathLike) -> List[Tuple[Meaning, Utterance]]:
    """Reads a corpus file back into (meaning, utterance) pairs.

    Raises:
        ValueError: a line does not have four tab-separated fields
    """
    corpus = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValueError(f"{path}:{line_no}: expected 4 fields, got {len(fields)}")
            action, agent, patient = (int(v) for v in fields[:3])
            tokens = tuple(int(t) for t in fields[3].split())
            corpus.append((Meaning(action=action, agent=agent, patient=patient), tokens))
    return corpus


def write_lexicon(path: PathLike, inv: Inventory = DEFAULT_INVENTORY):
    lines = [f"{k}\t{v}\n" for k, v in sorted(lexicon(inv).items())]
    atomic_write_text(path, "".join(lines))


def read_lexicon(path: PathLike) -> Dict[int, str]:
    words = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line:
                key, value = line.split("\t", maxsplit=1)
                words[int(key)] = value
    return words
