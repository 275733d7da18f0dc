"""Miniature verb-final languages with an optional case marker.

A language allows two orders, SOV and OSV, and an optional marker `mk` placed right after
the marked noun (the object in object-marking languages, the subject in subject-marking
ones). It is fully described by a [`LanguageSpec`][casemark.language.grammar.LanguageSpec].

Typical Usage:

    ```python
    import casemark as cm

    spec = cm.PRESETS["dominant-obj"]
    rng = cm.nn.make_rng(7)
    meaning = cm.Meaning(action=0, agent=0, patient=12)
    utterance = cm.sample_utterance(meaning, spec, rng)
    print(cm.parse(utterance, meaning, spec))
    # e.g. <Parse.WELL_FORMED: (<Order.SOV: SOV>, True)>
    ```
"""
from typing import Dict, List, Tuple

import numpy as np
import funml as ml

from casemark.errors import ConfigError
from .meanings import Condition, DEFAULT_INVENTORY, Inventory, Meaning

Utterance = Tuple[int, ...]

MAX_UTTERANCE_LEN = 10


class Order(ml.Enum):
    """Relative order of the two nouns before the verb.

    Variants:
        - SOV: subject (agent) first
        - OSV: object (patient) first
    """

    SOV = None
    OSV = None


class Parse(ml.Enum):
    """Outcome of checking an utterance against the grammar for a given meaning.

    Variants:
        - ILL_FORMED: the utterance matches no template
        - WELL_FORMED: carries `(order, marked)`
    """

    ILL_FORMED = None
    WELL_FORMED = (Order, bool)


@ml.record
class LanguageSpec:
    """One artificial language: the marked role and the order/marking probabilities.

    Args:
        condition: which argument takes the marker
        p_sov: probability of SOV order
        p_mk_given_sov: probability of marking an SOV utterance
        p_mk_given_osv: probability of marking an OSV utterance
        name: a label used in file names and plots
    """

    condition: Condition
    p_sov: float
    p_mk_given_sov: float
    p_mk_given_osv: float
    name: str = "custom"


PRESETS: Dict[str, LanguageSpec] = {
    "dominant-obj": LanguageSpec(
        condition=Condition.OBJECT,
        p_sov=0.60,
        p_mk_given_sov=0.67,
        p_mk_given_osv=0.50,
        name="dominant-obj",
    ),
    "neutral-obj": LanguageSpec(
        condition=Condition.OBJECT,
        p_sov=0.50,
        p_mk_given_sov=0.67,
        p_mk_given_osv=0.67,
        name="neutral-obj",
    ),
    "neutral-subj": LanguageSpec(
        condition=Condition.SUBJECT,
        p_sov=0.50,
        p_mk_given_sov=0.67,
        p_mk_given_osv=0.67,
        name="neutral-subj",
    ),
}


def check_language_spec(spec: LanguageSpec) -> LanguageSpec:
    """Returns the language unchanged if all probabilities lie in [0, 1].

    Raises:
        ConfigError: a probability is out of range
    """
    for key in ("p_sov", "p_mk_given_sov", "p_mk_given_osv"):
        value = getattr(spec, key)
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"language.{key}", f"{value} is not a probability")
    return spec


def expected_marking(spec: LanguageSpec) -> float:
    """Overall marking proportion implied by the language."""
    return spec.p_sov * spec.p_mk_given_sov + (1 - spec.p_sov) * spec.p_mk_given_osv


def render(
    m: Meaning,
    order: Order,
    marked: bool,
    condition: Condition,
    inv: Inventory = DEFAULT_INVENTORY,
) -> Utterance:
    """Spells out a meaning with a chosen order and marking.

    Example:
        `render(eat/alice/cake, Order.OSV, True, Condition.OBJECT)` gives "cake mk alice eat".
    """
    subj, obj = m.agent, m.patient
    nouns = [subj, obj] if order == Order.SOV else [obj, subj]

    if marked:
        marked_noun = obj if condition == Condition.OBJECT else subj
        nouns.insert(nouns.index(marked_noun) + 1, inv.marker)

    return tuple(nouns + [inv.action_token(m.action)])


def sample_utterance(
    m: Meaning,
    spec: LanguageSpec,
    rng: np.random.Generator,
    inv: Inventory = DEFAULT_INVENTORY,
) -> Utterance:
    """Draws an order, then a marking decision conditioned on it, and renders the meaning.

    Args:
        m: the meaning to express
        spec: the language
        rng: source of the two Bernoulli draws
        inv: the inventory defining the token layout

    Returns:
        the utterance as a tuple of token ids
    """
    is_sov = rng.random() < spec.p_sov
    p_marked = spec.p_mk_given_sov if is_sov else spec.p_mk_given_osv
    marked = bool(rng.random() < p_marked)
    order = Order.SOV if is_sov else Order.OSV
    return render(m, order, marked, spec.condition, inv)


def generate_corpus(
    meanings: List[Meaning],
    spec: LanguageSpec,
    rng: np.random.Generator,
    inv: Inventory = DEFAULT_INVENTORY,
) -> List[Tuple[Meaning, Utterance]]:
    """Samples one reference utterance per meaning.

    Returns:
        (meaning, utterance) pairs in the order of `meanings`
    """
    return [(m, sample_utterance(m, spec, rng, inv)) for m in meanings]


def parse(
    u: Utterance,
    m: Meaning,
    spec: LanguageSpec,
    inv: Inventory = DEFAULT_INVENTORY,
) -> Parse:
    """Checks an utterance against the grammar for the intended meaning.

    Well-formed utterances are `[N1, N2, V]`, `[N1, N2, mk, V]` or `[N1, mk, N2, V]` where V is
    the meaning's action, {N1, N2} are its agent and patient, and any marker directly follows
    the noun filling the marked role. The order is SOV when the agent comes first.

    Args:
        u: the utterance to check
        m: the meaning it is supposed to express
        spec: the language whose grammar applies
        inv: the inventory defining the token layout

    Returns:
        Parse.WELL_FORMED((order, marked)) or Parse.ILL_FORMED
    """
    u = tuple(u)
    if len(u) not in (3, 4) or u[-1] != inv.action_token(m.action):
        return Parse.ILL_FORMED

    body = list(u[:-1])
    marked = inv.marker in body

    if marked:
        position = body.index(inv.marker)
        marked_noun = m.patient if spec.condition == Condition.OBJECT else m.agent
        if body.count(inv.marker) != 1 or position == 0:
            return Parse.ILL_FORMED
        if body[position - 1] != marked_noun:
            return Parse.ILL_FORMED
        del body[position]

    if len(body) != 2 or set(body) != {m.agent, m.patient}:
        return Parse.ILL_FORMED

    order = Order.SOV if body[0] == m.agent else Order.OSV
    return Parse.WELL_FORMED(order, marked)
