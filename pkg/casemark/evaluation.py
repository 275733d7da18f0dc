"""Measurements of agents and pairs.

Accuracies are exact-match proportions. Production preferences (the share of SOV order
and of marker use) are computed over well-formed productions only and split by the
ambiguity class of each meaning. Everything here is read-only with respect to agents.

Typical Usage:

    ```python
    import casemark as cm

    report = cm.evaluate_pair(pair, test, test_corpora, spec, cm.Phase.POST_SL, pair_id=0)
    rows = cm.tidy_rows(report)
    ```
"""
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import funml as ml
from scipy import stats

from casemark.agents import Agent, DecodeMode, meaning_targets, predict_meanings
from casemark.language import (
    AMBIGUITY_CLASSES,
    AmbiguityClass,
    Inventory,
    LanguageSpec,
    Meaning,
    Order,
    Parse,
    Utterance,
    in_class,
    parse,
)
from casemark.nn import Rng, make_rng

_logger = logging.getLogger(__name__)

BOOTSTRAP_RESAMPLES = 10_000


class Phase(ml.Enum):
    """When an evaluation is taken.

    Variants:
        - POST_SL: after supervised learning
        - POST_RL: after the interaction phase
    """

    POST_SL = None
    POST_RL = None


PHASES = [Phase.POST_SL, Phase.POST_RL]


@ml.record
class EvalConfig:
    """Evaluation switches.

    Args:
        sampled: decode productions by sampling instead of greedily
        filter_wellformed: compute preferences over well-formed productions only
    """

    sampled: bool = False
    filter_wellformed: bool = True


def _ratio(num: int, den: int) -> ml.Option:
    return ml.Option.SOME(num / den) if den else ml.Option.NONE


def unwrap(value: ml.Option) -> float:
    """The proportion held by an Option, or NaN when it is undefined."""
    return (
        ml.match(value)
        .case(ml.Option.SOME(Any), do=lambda v: float(v))
        .case(ml.Option.NONE, do=lambda: float("nan"))
    )()


@ml.record
class ProductionStats:
    """Order and marking counts of one agent's productions for one ambiguity class.

    Proportions are `Option`s and are `Option.NONE` when their denominator is zero.
    """

    ambiguity_class: AmbiguityClass
    n_total: int
    n_wellformed: int
    n_sov: int
    n_marked: int
    n_marked_sov: int
    n_marked_osv: int
    p_sov: ml.Option
    p_marked: ml.Option
    p_mk_given_sov: ml.Option
    p_mk_given_osv: ml.Option

    @classmethod
    def from_counts(
        cls,
        ambiguity_class: AmbiguityClass,
        n_total: int,
        n_wellformed: int,
        n_sov: int,
        n_marked: int,
        n_marked_sov: int,
        n_marked_osv: int,
        denominator: Optional[int] = None,
    ) -> "ProductionStats":
        """Builds the stats, deriving every proportion from the counts.

        Args:
            denominator: what p_sov and p_marked are taken over; defaults to n_wellformed
        """
        den = n_wellformed if denominator is None else denominator
        return cls(
            ambiguity_class=ambiguity_class,
            n_total=n_total,
            n_wellformed=n_wellformed,
            n_sov=n_sov,
            n_marked=n_marked,
            n_marked_sov=n_marked_sov,
            n_marked_osv=n_marked_osv,
            p_sov=_ratio(n_sov, den),
            p_marked=_ratio(n_marked, den),
            p_mk_given_sov=_ratio(n_marked_sov, n_sov),
            p_mk_given_osv=_ratio(n_marked_osv, n_wellformed - n_sov),
        )


@ml.record
class AgentEval:
    """Everything measured for one agent in one phase.

    `production` and `communication_as_speaker` are keyed by ambiguity class value
    ("ALL", "AMB", "NOT_AMB"). `ill_formed_ratio` is taken over the same decodes as
    `production`, so it follows `EvalConfig.sampled`; `speaking_accuracy` is always greedy.
    """

    agent_id: int
    speaking_accuracy: float
    listening_accuracy: float
    ill_formed_ratio: float
    production: Dict[str, ProductionStats]
    communication_as_speaker: Dict[str, float]


@ml.record
class EvalReport:
    """A pair's evaluation in one phase.

    `communication` averages both speaking directions.
    """

    pair_id: int
    phase: Phase
    agents: List[AgentEval]
    communication: Dict[str, float]


@ml.record
class DcmDelta:
    """Ambiguous-minus-unambiguous differences of one agent's preferences."""

    pair_id: int
    agent_id: int
    phase: Phase
    d_marked: ml.Option
    d_sov: ml.Option


@ml.record
class DeltaSummary:
    """Across-agent summary of one difference.

    The sign test is two-sided over agents with a non-zero difference; agents whose
    difference is undefined are counted in `n_excluded`.
    """

    n: int
    n_excluded: int
    mean: ml.Option
    std: ml.Option
    n_positive: int
    n_negative: int
    sign_test_p: ml.Option


@ml.record
class SlopeFit:
    """Least-squares line of p_marked against p_sov across agents."""

    slope: float
    intercept: float
    stderr: float
    p_value: float
    n: int


def decode(
    agent: Agent,
    meanings: Sequence[Meaning],
    mode: DecodeMode = DecodeMode.GREEDY,
    rng: Optional[Rng] = None,
) -> List[Utterance]:
    """The agent's productions for a list of meanings."""
    if not meanings:
        return []
    return agent.rollout(list(meanings), mode, rng).utterances


def production_stats(
    meanings: Sequence[Meaning],
    utterances: Sequence[Utterance],
    spec: LanguageSpec,
    inv: Inventory,
    filter_wellformed: bool = True,
) -> Dict[str, ProductionStats]:
    """Counts order and marking of productions, per ambiguity class.

    With `filter_wellformed` off, proportions are taken over every production: an
    ill-formed production counts as marked when it contains the marker and never
    counts as SOV.

    Args:
        meanings: the intended meanings
        utterances: the productions, aligned with `meanings`
        spec: the language whose grammar decides well-formedness
        inv: the inventory
        filter_wellformed: whether to discard ill-formed productions

    Returns:
        stats keyed by ambiguity class value
    """
    parsed = [
        (m, u, parse(u, m, spec, inv)) for m, u in zip(meanings, utterances)
    ]
    stats_by_class = {}

    for cls in AMBIGUITY_CLASSES:
        rows = [r for r in parsed if in_class(r[0], cls, spec.condition, inv)]
        well_formed = [p.value for _, _, p in rows if p != Parse.ILL_FORMED]
        n_sov = sum(1 for order, _ in well_formed if order == Order.SOV)
        n_marked_sov = sum(1 for o, mk in well_formed if mk and o == Order.SOV)
        n_marked_osv = sum(1 for o, mk in well_formed if mk and o == Order.OSV)

        if filter_wellformed:
            n_marked, denominator = n_marked_sov + n_marked_osv, None
        else:
            n_marked = sum(1 for _, u, _ in rows if inv.marker in u)
            denominator = len(rows)

        stats_by_class[cls.value] = ProductionStats.from_counts(
            cls,
            n_total=len(rows),
            n_wellformed=len(well_formed),
            n_sov=n_sov,
            n_marked=n_marked,
            n_marked_sov=n_marked_sov,
            n_marked_osv=n_marked_osv,
            denominator=denominator,
        )

    return stats_by_class


def production_preferences(
    agent: Agent,
    meanings: Sequence[Meaning],
    spec: LanguageSpec,
    cfg: Optional[EvalConfig] = None,
    rng: Optional[Rng] = None,
) -> Dict[str, ProductionStats]:
    """Decodes every meaning and summarises the order and marking of the productions.

    Decoding is greedy unless `cfg.sampled` is set, in which case `rng` is required.
    If nothing the agent produces is well-formed the proportions are undefined and a
    warning is logged; the call still succeeds.
    """
    cfg = EvalConfig() if cfg is None else cfg
    mode = DecodeMode.SAMPLE if cfg.sampled else DecodeMode.GREEDY
    utterances = decode(agent, meanings, mode, rng)
    result = production_stats(
        meanings, utterances, spec, agent.inv, cfg.filter_wellformed
    )
    if meanings and result[AmbiguityClass.ALL.value].n_wellformed == 0:
        _logger.warning("no well-formed productions among %d meanings", len(meanings))
    return result


def speaking_accuracy(
    agent: Agent,
    meanings: Sequence[Meaning],
    spec: LanguageSpec,
    utterances: Optional[Sequence[Utterance]] = None,
) -> float:
    """Share of greedy productions that are well-formed for their meaning.

    Args:
        utterances: productions decoded earlier, to avoid decoding again
    """
    if not meanings:
        return float("nan")
    if utterances is None:
        utterances = decode(agent, meanings)
    hits = [
        parse(u, m, spec, agent.inv) != Parse.ILL_FORMED
        for m, u in zip(meanings, utterances)
    ]
    return float(np.mean(hits))


def listening_accuracy(
    agent: Agent, corpus: Sequence[Tuple[Meaning, Utterance]]
) -> float:
    """Share of reference utterances the agent decodes to exactly their meaning."""
    if not corpus:
        return float("nan")
    meanings = [m for m, _ in corpus]
    trace = agent.listen_batch([u for _, u in corpus])
    matched = (predict_meanings(trace.logits) == meaning_targets(meanings)).all(axis=1)
    return float(matched.mean())


def communication_accuracy(
    speaker: Agent,
    listener: Agent,
    meanings: Sequence[Meaning],
    spec: LanguageSpec,
    utterances: Optional[Sequence[Utterance]] = None,
) -> Dict[str, float]:
    """Exact-match reconstruction accuracy of the speaker-to-listener channel.

    The speaker greedy-decodes each meaning and the listener's argmax triple is compared
    with it. Results are keyed by ambiguity class value; an empty class gives NaN.
    """
    if utterances is None:
        utterances = decode(speaker, meanings)
    if meanings:
        trace = listener.listen_batch(list(utterances))
        predicted = predict_meanings(trace.logits)
        matched = (predicted == meaning_targets(meanings)).all(axis=1)
    else:
        matched = np.zeros(0, dtype=bool)

    accuracy = {}
    for cls in AMBIGUITY_CLASSES:
        mask = np.array(
            [in_class(m, cls, spec.condition, speaker.inv) for m in meanings], dtype=bool
        )
        accuracy[cls.value] = float(matched[mask].mean()) if mask.any() else float("nan")
    return accuracy


def pair_communication(
    pair: Tuple[Agent, Agent], meanings: Sequence[Meaning], spec: LanguageSpec
) -> Dict[str, float]:
    """Communication accuracy averaged over both speaking directions."""
    first = communication_accuracy(pair[0], pair[1], meanings, spec)
    second = communication_accuracy(pair[1], pair[0], meanings, spec)
    return {k: (first[k] + second[k]) / 2.0 for k in first}


def evaluate_pair(
    pair: Tuple[Agent, Agent],
    meanings: Sequence[Meaning],
    test_corpora: Sequence[Sequence[Tuple[Meaning, Utterance]]],
    spec: LanguageSpec,
    phase: Phase,
    pair_id: int = 0,
    cfg: Optional[EvalConfig] = None,
    rng: Optional[Rng] = None,
) -> EvalReport:
    """Takes every measurement of a pair on held-out meanings.

    Args:
        pair: the two agents
        meanings: the test split
        test_corpora: each agent's reference pairs for the test split
        spec: the language
        phase: when the evaluation is taken
        pair_id: recorded in the report
        cfg: evaluation switches
        rng: generator for sampled decoding; derived from the pair id when omitted

    Returns:
        the report
    """
    cfg = EvalConfig() if cfg is None else cfg
    if cfg.sampled and rng is None:
        rng = make_rng(pair_id, PHASES.index(phase) + 1)

    greedy = [decode(a, meanings) for a in pair]
    agents = []
    for k, agent in enumerate(pair):
        production = production_preferences(agent, meanings, spec, cfg, rng)
        spoken = speaking_accuracy(agent, meanings, spec, greedy[k])
        overall = production[AmbiguityClass.ALL.value]
        agents.append(
            AgentEval(
                agent_id=k,
                speaking_accuracy=spoken,
                listening_accuracy=listening_accuracy(agent, test_corpora[k]),
                # same decodes as the production counts
                ill_formed_ratio=unwrap(
                    _ratio(overall.n_total - overall.n_wellformed, overall.n_total)
                ),
                production=production,
                communication_as_speaker=communication_accuracy(
                    agent, pair[1 - k], meanings, spec, greedy[k]
                ),
            )
        )

    communication = {
        key: (agents[0].communication_as_speaker[key] + agents[1].communication_as_speaker[key])
        / 2.0
        for key in agents[0].communication_as_speaker
    }
    return EvalReport(
        pair_id=pair_id, phase=phase, agents=agents, communication=communication
    )


def dcm_delta(report: EvalReport) -> List[DcmDelta]:
    """Per-agent ambiguous-minus-unambiguous differences of p_marked and p_sov.

    A difference is undefined when either side is.
    """

    def diff(a: ml.Option, b: ml.Option) -> ml.Option:
        if ml.is_some(a) and ml.is_some(b):
            return ml.Option.SOME(unwrap(a) - unwrap(b))
        return ml.Option.NONE

    deltas = []
    for agent in report.agents:
        amb = agent.production[AmbiguityClass.AMB.value]
        not_amb = agent.production[AmbiguityClass.NOT_AMB.value]
        deltas.append(
            DcmDelta(
                pair_id=report.pair_id,
                agent_id=agent.agent_id,
                phase=report.phase,
                d_marked=diff(amb.p_marked, not_amb.p_marked),
                d_sov=diff(amb.p_sov, not_amb.p_sov),
            )
        )
    return deltas


def aggregate_deltas(values: Sequence[ml.Option]) -> DeltaSummary:
    """Mean, standard deviation and a paired sign test over per-agent differences."""
    defined = np.array([unwrap(v) for v in values if ml.is_some(v)], dtype=float)
    n_positive = int(np.sum(defined > 0))
    n_negative = int(np.sum(defined < 0))
    n_signed = n_positive + n_negative

    sign_p = (
        ml.Option.SOME(float(stats.binomtest(n_positive, n_signed, 0.5).pvalue))
        if n_signed
        else ml.Option.NONE
    )
    return DeltaSummary(
        n=int(defined.size),
        n_excluded=len(values) - int(defined.size),
        mean=ml.Option.SOME(float(defined.mean())) if defined.size else ml.Option.NONE,
        std=ml.Option.SOME(float(defined.std(ddof=1)))
        if defined.size > 1
        else ml.Option.NONE,
        n_positive=n_positive,
        n_negative=n_negative,
        sign_test_p=sign_p,
    )


def bootstrap_ci(
    values: Sequence[float],
    confidence: float = 0.95,
    n_resamples: int = BOOTSTRAP_RESAMPLES,
    seed: int = 0,
) -> Tuple[float, float]:
    """Percentile bootstrap confidence interval of the mean, ignoring NaNs.

    Fewer than two values give a degenerate interval at the mean (NaN when empty).
    """
    data = np.asarray([v for v in values if not np.isnan(v)], dtype=float)
    if data.size == 0:
        return float("nan"), float("nan")
    if data.size < 2 or np.all(data == data[0]):
        return float(data.mean()), float(data.mean())

    result = stats.bootstrap(
        (data,),
        np.mean,
        n_resamples=n_resamples,
        confidence_level=confidence,
        method="percentile",
        random_state=make_rng(seed),
    )
    interval = result.confidence_interval
    return float(interval.low), float(interval.high)


def order_marking_slope(
    rows: pd.DataFrame, phase: Phase, ambiguity_class: AmbiguityClass
) -> ml.Option:
    """Fits p_marked against p_sov across the agents of one phase and class.

    Args:
        rows: tidy evaluation rows
        phase: which phase to take
        ambiguity_class: which class to take

    Returns:
        Option.SOME(SlopeFit), or Option.NONE with fewer than three usable agents or
        no spread in p_sov
    """
    selected = rows[
        (rows["phase"] == phase.value) & (rows["ambiguity_class"] == ambiguity_class.value)
    ].dropna(subset=["p_sov", "p_marked"])

    if len(selected) < 3 or selected["p_sov"].nunique() < 2:
        return ml.Option.NONE

    fit = stats.linregress(selected["p_sov"], selected["p_marked"])
    return ml.Option.SOME(
        SlopeFit(
            slope=float(fit.slope),
            intercept=float(fit.intercept),
            stderr=float(fit.stderr),
            p_value=float(fit.pvalue),
            n=int(len(selected)),
        )
    )


EVAL_COLUMNS = [
    "pair_id",
    "agent_id",
    "phase",
    "ambiguity_class",
    "n_total",
    "n_wellformed",
    "n_sov",
    "n_marked",
    "n_marked_sov",
    "n_marked_osv",
    "p_sov",
    "p_marked",
    "p_mk_given_sov",
    "p_mk_given_osv",
    "ill_formed_ratio",
    "speaking_accuracy",
    "listening_accuracy",
    "comm_accuracy",
    "pair_comm_accuracy",
]


def tidy_rows(report: EvalReport) -> List[Dict[str, Any]]:
    """One row per (agent, ambiguity class), in the column order of EVAL_COLUMNS.

    Undefined proportions become NaN. `ill_formed_ratio` is taken within the class;
    speaking and listening accuracies are whole-test-set values repeated per class.
    """
    rows = []
    for agent in report.agents:
        for cls in AMBIGUITY_CLASSES:
            s = agent.production[cls.value]
            rows.append(
                {
                    "pair_id": report.pair_id,
                    "agent_id": agent.agent_id,
                    "phase": report.phase.value,
                    "ambiguity_class": cls.value,
                    "n_total": s.n_total,
                    "n_wellformed": s.n_wellformed,
                    "n_sov": s.n_sov,
                    "n_marked": s.n_marked,
                    "n_marked_sov": s.n_marked_sov,
                    "n_marked_osv": s.n_marked_osv,
                    "p_sov": unwrap(s.p_sov),
                    "p_marked": unwrap(s.p_marked),
                    "p_mk_given_sov": unwrap(s.p_mk_given_sov),
                    "p_mk_given_osv": unwrap(s.p_mk_given_osv),
                    "ill_formed_ratio": unwrap(
                        _ratio(s.n_total - s.n_wellformed, s.n_total)
                    ),
                    "speaking_accuracy": agent.speaking_accuracy,
                    "listening_accuracy": agent.listening_accuracy,
                    "comm_accuracy": agent.communication_as_speaker[cls.value],
                    "pair_comm_accuracy": report.communication[cls.value],
                }
            )
    return rows


def summarize(frame: pd.DataFrame, seed: int = 0) -> pd.DataFrame:
    """Seed-averaged table of the tidy evaluation rows, per phase and ambiguity class.

    Each measure gets its mean, standard deviation, bootstrap interval and the number of
    agents excluded because the value was undefined.
    """
    measures = [
        "p_sov",
        "p_marked",
        "ill_formed_ratio",
        "speaking_accuracy",
        "listening_accuracy",
        "comm_accuracy",
    ]
    records = []
    for (phase, cls), group in frame.groupby(["phase", "ambiguity_class"], sort=True):
        for measure in measures:
            values = group[measure].to_numpy(dtype=float)
            defined = values[~np.isnan(values)]
            low, high = bootstrap_ci(defined, seed=seed)
            records.append(
                {
                    "phase": phase,
                    "ambiguity_class": cls,
                    "measure": measure,
                    "n": int(defined.size),
                    "n_excluded": int(values.size - defined.size),
                    "mean": float(defined.mean()) if defined.size else float("nan"),
                    "std": float(defined.std(ddof=1))
                    if defined.size > 1
                    else float("nan"),
                    "ci_low": low,
                    "ci_high": high,
                }
            )
    return pd.DataFrame.from_records(records)


def delta_rows(frame: pd.DataFrame) -> pd.DataFrame:
    """Per-agent Amb − NotAmb differences recomputed from tidy evaluation rows."""
    keys = ["pair_id", "agent_id", "phase"]
    amb = frame[frame["ambiguity_class"] == AmbiguityClass.AMB.value].set_index(keys)
    not_amb = frame[frame["ambiguity_class"] == AmbiguityClass.NOT_AMB.value].set_index(
        keys
    )
    joined = amb[["p_marked", "p_sov"]].join(
        not_amb[["p_marked", "p_sov"]], lsuffix="_amb", rsuffix="_not_amb", how="inner"
    )
    result = pd.DataFrame(
        {
            "d_marked": joined["p_marked_amb"] - joined["p_marked_not_amb"],
            "d_sov": joined["p_sov_amb"] - joined["p_sov_not_amb"],
        }
    )
    return result.reset_index().sort_values(keys, kind="mergesort").reset_index(drop=True)


def delta_summary_table(frame: pd.DataFrame) -> pd.DataFrame:
    """Sign-test summaries of Δp_marked and Δp_sov per phase."""
    deltas = delta_rows(frame)
    records = []
    for phase, group in deltas.groupby("phase", sort=True):
        for column in ("d_marked", "d_sov"):
            options = [
                ml.Option.NONE if np.isnan(v) else ml.Option.SOME(float(v))
                for v in group[column]
            ]
            summary = aggregate_deltas(options)
            records.append(
                {
                    "phase": phase,
                    "delta": column,
                    "n": summary.n,
                    "n_excluded": summary.n_excluded,
                    "mean": unwrap(summary.mean),
                    "std": unwrap(summary.std),
                    "n_positive": summary.n_positive,
                    "n_negative": summary.n_negative,
                    "sign_test_p": unwrap(summary.sign_test_p),
                }
            )
    return pd.DataFrame.from_records(records)
