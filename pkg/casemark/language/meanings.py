"""Entities, actions and the meaning spaces built from them.

Entities come in two typicality classes. Ambiguous entities occur in both the agent and
the patient role; unambiguous entities are restricted to the one role left free by the
marking condition (patients under object marking, agents under subject marking).

Typical Usage:

    ```python
    import casemark as cm

    inventory = cm.Inventory()
    meanings = cm.build_meaning_space(inventory, cm.Condition.OBJECT)
    print(len(meanings))
    # prints 1520
    ```
"""
from typing import List, NamedTuple

import funml as ml


class Condition(ml.Enum):
    """Which argument the marker attaches to, and thus which role is typicality-structured.

    Variants:
        - OBJECT: agents are always ambiguous entities; patients may be of either class
        - SUBJECT: patients are always ambiguous entities; agents may be of either class
    """

    OBJECT = None
    SUBJECT = None


class AmbiguityClass(ml.Enum):
    """Subsets of a meaning set used when splitting statistics.

    Variants:
        - ALL: every meaning
        - AMB: the free-role entity is ambiguous
        - NOT_AMB: the free-role entity is unambiguous
    """

    ALL = None
    AMB = None
    NOT_AMB = None


AMBIGUITY_CLASSES = [AmbiguityClass.ALL, AmbiguityClass.AMB, AmbiguityClass.NOT_AMB]


class Meaning(NamedTuple):
    """A scene: who does what to whom. Fields are entity/action ids."""

    action: int
    agent: int
    patient: int


@ml.record
class Inventory:
    """Sizes of the entity and action sets and the resulting token layout.

    Entity ids are `0 .. n_amb-1` (ambiguous) followed by `n_amb .. n_amb+n_unamb-1`
    (unambiguous); action ids are `0 .. n_actions-1`. Tokens reuse entity ids, put actions
    after the entities, then the marker; the end-of-sequence token follows the external
    vocabulary and never appears in corpora.
    """

    n_amb: int = 10
    n_unamb: int = 10
    n_actions: int = 8

    @property
    def n_entities(self) -> int:
        return self.n_amb + self.n_unamb

    @property
    def amb_entities(self) -> range:
        return range(0, self.n_amb)

    @property
    def unamb_entities(self) -> range:
        return range(self.n_amb, self.n_entities)

    @property
    def actions(self) -> range:
        return range(0, self.n_actions)

    @property
    def marker(self) -> int:
        return self.n_entities + self.n_actions

    @property
    def eos(self) -> int:
        return self.marker + 1

    @property
    def vocab_size(self) -> int:
        """Size of the external vocabulary (entities, actions and the marker)."""
        return self.n_entities + self.n_actions + 1

    def action_token(self, action: int) -> int:
        return self.n_entities + action

    def is_amb(self, entity: int) -> bool:
        return 0 <= entity < self.n_amb


DEFAULT_INVENTORY = Inventory()


def build_meaning_space(inv: Inventory, cond: Condition) -> List[Meaning]:
    """Lists every meaning allowed under the given condition, in canonical order.

    Under the object condition the agent is an ambiguous entity and the patient is any
    other entity; the subject condition mirrors this. The size is
    `n_amb * (n_unamb + n_amb - 1) * n_actions`.

    Args:
        inv: the entity and action inventory
        cond: the marking condition

    Returns:
        the meanings sorted by (action, agent, patient)
    """
    entities = list(range(inv.n_entities))
    pairs = (
        ml.match(cond)
        .case(
            Condition.OBJECT,
            do=lambda: [(a, p) for a in inv.amb_entities for p in entities if p != a],
        )
        .case(
            Condition.SUBJECT,
            do=lambda: [(a, p) for p in inv.amb_entities for a in entities if a != p],
        )
    )()
    return sorted(
        Meaning(action=action, agent=agent, patient=patient)
        for action in inv.actions
        for agent, patient in pairs
    )


def free_role_entity(m: Meaning, cond: Condition) -> int:
    """The entity in the role that admits both typicality classes."""
    return m.patient if cond == Condition.OBJECT else m.agent


def classify_ambiguity(
    m: Meaning, cond: Condition, inv: Inventory = DEFAULT_INVENTORY
) -> AmbiguityClass:
    """Tells whether a meaning's free-role entity is ambiguous.

    Args:
        m: a meaning valid under `cond`
        cond: the marking condition
        inv: the inventory the meaning was built from

    Returns:
        AmbiguityClass.AMB or AmbiguityClass.NOT_AMB
    """
    if inv.is_amb(free_role_entity(m, cond)):
        return AmbiguityClass.AMB
    return AmbiguityClass.NOT_AMB


def in_class(
    m: Meaning, cls: AmbiguityClass, cond: Condition, inv: Inventory = DEFAULT_INVENTORY
) -> bool:
    """Whether `m` belongs to the ambiguity class `cls` (everything belongs to ALL)."""
    return cls == AmbiguityClass.ALL or classify_ambiguity(m, cond, inv) == cls
