"""Runs agent pairs end to end and collects their outputs.

Every pair goes through the same pipeline: build its data, train both agents on their
corpora, evaluate, interact, evaluate again, write files. Pairs share nothing, so they
are spread over a process pool; a pair whose outputs are all on disk is skipped, which
makes a run resumable.

Layout of an output directory:

    config.json  manifest.json  lexicon.tsv
    eval.csv  turns.csv  accuracy.csv  sl_curve.csv      (all pairs, sorted by pair)
    pairs/pair_000/
        corpus_agent0.tsv  corpus_agent1.tsv
        agent0_post_sl.npz  agent1_post_sl.npz  agent0_post_rl.npz  agent1_post_rl.npz
        sl_curve.csv  turns.csv  accuracy.csv  eval.csv
"""
import json
import logging
import multiprocessing
import time
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import pandas as pd
import funml as ml

from casemark.agents import Agent, load_agent, save_agent
from casemark.evaluation import (
    EVAL_COLUMNS,
    PHASES,
    Phase,
    evaluate_pair,
    pair_communication,
    tidy_rows,
)
from casemark.language import (
    Meaning,
    Utterance,
    build_meaning_space,
    generate_corpus,
    resample_sl_subset,
    split_dataset,
    write_corpus,
    write_lexicon,
)
from casemark.nn import Rng, make_rng
from casemark.training import run_rl, train_supervised
from casemark.utils import atomic_write_csv, atomic_write_text
from .config import ExperimentConfig, build_config, config_hash, config_to_dict

_logger = logging.getLogger(__name__)

# leading tags keep the generators of different uses apart
INIT_STREAM = 1
DATA_STREAM = 2
PAIR_STREAM = 3
EVAL_STREAM = 4

TURN_COLUMNS = ["pair_id", "turn", "self_play", "speaker_agent", "mean_reward", "mean_acc"]
ACCURACY_COLUMNS = ["pair_id", "turn", "ambiguity_class", "accuracy"]
SL_CURVE_COLUMNS = ["pair_id", "agent_id", "epoch", "speaker_loss", "listener_loss"]

AGGREGATES = ["eval.csv", "turns.csv", "accuracy.csv", "sl_curve.csv"]


@ml.record
class PairStatus:
    """Where one pair stands.

    Args:
        pair_id: the pair
        status: "completed", "failed" or "pending"
        artifacts: file kind to path, relative to the output directory
        seconds: wall-clock time spent in this invocation
        error: the failure, if any
    """

    pair_id: int
    status: str
    artifacts: Dict[str, str]
    seconds: float
    error: str = ""


@ml.record
class RunManifest:
    """The state of an output directory after a run."""

    config_hash: str
    n_pairs: int
    pairs: List[PairStatus]
    seconds: float

    @property
    def n_failed(self) -> int:
        return sum(1 for p in self.pairs if p.status == "failed")


class PairData(NamedTuple):
    """A pair's meanings and the reference corpora of its two agents.

    `corpora[k]` maps every meaning of the space to agent k's reference utterance.
    """

    space: List[Meaning]
    train: List[Meaning]
    test: List[Meaning]
    corpora: List[Dict[Meaning, Utterance]]
    sl_corpora: List[List[Tuple[Meaning, Utterance]]]
    test_corpora: List[List[Tuple[Meaning, Utterance]]]


class PairJob(NamedTuple):
    config: Dict[str, Any]
    pair_id: int


class PairOutcome(NamedTuple):
    pair_id: int
    status: str
    artifacts: Dict[str, str]
    seconds: float
    error: str


def agent_seed(cfg: ExperimentConfig, pair_id: int, k: int) -> int:
    return cfg.base_seed + 2 * pair_id + k


def agent_rng(cfg: ExperimentConfig, pair_id: int, k: int) -> Rng:
    """Agent k's own generator: initialisation and supervised shuffling."""
    return make_rng(INIT_STREAM, agent_seed(cfg, pair_id, k))


def data_rng(cfg: ExperimentConfig, pair_id: int, k: int) -> Rng:
    """Agent k's corpus and learning-subset generator."""
    return make_rng(DATA_STREAM, agent_seed(cfg, pair_id, k))


def pair_rng(cfg: ExperimentConfig, pair_id: int) -> Rng:
    """The pair's split and interaction generator."""
    return make_rng(PAIR_STREAM, cfg.base_seed, pair_id)


def eval_rng(cfg: ExperimentConfig, pair_id: int, phase: Phase) -> Rng:
    """Sampled-decoding generator for one evaluation of a pair."""
    return make_rng(EVAL_STREAM, cfg.base_seed, pair_id, PHASES.index(phase) + 1)


def pair_artifacts(pair_id: int) -> Dict[str, str]:
    """File kind to path relative to the output directory; `eval` is written last."""
    base = f"pairs/pair_{pair_id:03d}"
    files = {f"corpus_{k}": f"{base}/corpus_agent{k}.tsv" for k in (0, 1)}
    for phase in ("post_sl", "post_rl"):
        for k in (0, 1):
            files[f"checkpoint_{phase}_{k}"] = f"{base}/agent{k}_{phase}.npz"
    files["sl_curve"] = f"{base}/sl_curve.csv"
    files["turns"] = f"{base}/turns.csv"
    files["accuracy"] = f"{base}/accuracy.csv"
    files["eval"] = f"{base}/eval.csv"
    return files


def is_complete(out_dir: str, pair_id: int) -> bool:
    return all((Path(out_dir) / p).exists() for p in pair_artifacts(pair_id).values())


def build_pair_data(cfg: ExperimentConfig, pair_id: int) -> Tuple[PairData, Rng]:
    """Derives a pair's split and corpora from the seeds.

    The pair generator draws the split and is returned for the interaction phase.
    Agent k's utterances are sampled once per meaning of the whole space from its
    data generator, which then draws its learning subset.

    Returns:
        the data and the pair generator
    """
    space = build_meaning_space(cfg.inventory, cfg.language.condition)
    rng = pair_rng(cfg, pair_id)
    train, test = split_dataset(space, rng, cfg.test_fraction)

    corpora, sl_corpora, test_corpora = [], [], []
    for k in (0, 1):
        corpus_rng = data_rng(cfg, pair_id, k)
        corpus = dict(generate_corpus(space, cfg.language, corpus_rng, cfg.inventory))
        subset = resample_sl_subset(train, corpus_rng, cfg.sl.subset_fraction)
        corpora.append(corpus)
        sl_corpora.append([(m, corpus[m]) for m in subset])
        test_corpora.append([(m, corpus[m]) for m in test])

    return PairData(space, train, test, corpora, sl_corpora, test_corpora), rng


def make_agents(cfg: ExperimentConfig, pair_id: int) -> Tuple[Agent, Agent]:
    return tuple(
        Agent(cfg.inventory, cfg.agent, agent_rng(cfg, pair_id, k))
        for k in (0, 1)
    )


class _PairRun:
    """Mutable state threaded through the pair pipeline."""

    def __init__(self, cfg: ExperimentConfig, pair_id: int):
        self.cfg = cfg
        self.pair_id = pair_id
        self.out_dir = Path(cfg.out_dir)
        self.files = pair_artifacts(pair_id)
        self.data: Optional[PairData] = None
        self.rng: Optional[Rng] = None
        self.agents: Tuple[Agent, ...] = ()
        self.sl_rows: List[Dict[str, Any]] = []
        self.eval_rows: List[Dict[str, Any]] = []
        self.turn_rows: List[Dict[str, Any]] = []
        self.accuracy_rows: List[Dict[str, Any]] = []

    def path(self, kind: str) -> Path:
        return self.out_dir / self.files[kind]


def _prepare(run: _PairRun) -> _PairRun:
    run.data, run.rng = build_pair_data(run.cfg, run.pair_id)
    run.agents = make_agents(run.cfg, run.pair_id)
    for k in (0, 1):
        write_corpus(run.path(f"corpus_{k}"), sorted(run.data.corpora[k].items()))
    return run


def _supervised_phase(run: _PairRun) -> _PairRun:
    for k, agent in enumerate(run.agents):
        for log in train_supervised(agent, run.data.sl_corpora[k], run.cfg.sl):
            run.sl_rows.append({"pair_id": run.pair_id, "agent_id": k, **dict(log)})
        save_agent(agent, run.path(f"checkpoint_post_sl_{k}"))
    return run


def _evaluate(phase: Phase, run: _PairRun) -> _PairRun:
    rng = eval_rng(run.cfg, run.pair_id, phase)
    report = evaluate_pair(
        run.agents,
        run.data.test,
        run.data.test_corpora,
        run.cfg.language,
        phase,
        pair_id=run.pair_id,
        cfg=run.cfg.evaluation,
        rng=rng,
    )
    run.eval_rows.extend(tidy_rows(report))
    _logger.info(
        "pair %d %s: communication accuracy %.3f",
        run.pair_id,
        phase.value,
        report.communication["ALL"],
    )
    return run


def _interaction_phase(run: _PairRun) -> _PairRun:
    def record_accuracy(turn: int):
        accuracy = pair_communication(run.agents, run.data.test, run.cfg.language)
        for cls, value in accuracy.items():
            run.accuracy_rows.append(
                {
                    "pair_id": run.pair_id,
                    "turn": turn,
                    "ambiguity_class": cls,
                    "accuracy": value,
                }
            )

    logs = run_rl(run.agents, run.data.train, run.cfg.rl, run.rng, record_accuracy)
    run.turn_rows = [{"pair_id": run.pair_id, **dict(log)} for log in logs]
    for k, agent in enumerate(run.agents):
        save_agent(agent, run.path(f"checkpoint_post_rl_{k}"))
    return run


def _write_outputs(run: _PairRun) -> Dict[str, str]:
    atomic_write_csv(
        pd.DataFrame(run.sl_rows, columns=SL_CURVE_COLUMNS), run.path("sl_curve")
    )
    atomic_write_csv(pd.DataFrame(run.turn_rows, columns=TURN_COLUMNS), run.path("turns"))
    atomic_write_csv(
        pd.DataFrame(run.accuracy_rows, columns=ACCURACY_COLUMNS), run.path("accuracy")
    )
    atomic_write_csv(pd.DataFrame(run.eval_rows, columns=EVAL_COLUMNS), run.path("eval"))
    return run.files


evaluate_phase = ml.val(lambda phase, run: _evaluate(phase, run))

pair_pipeline = (
    ml.val(_prepare)
    >> _supervised_phase
    >> evaluate_phase(Phase.POST_SL)
    >> _interaction_phase
    >> evaluate_phase(Phase.POST_RL)
    >> _write_outputs
)


def _attempt(job: PairJob) -> ml.Result:
    try:
        cfg = build_config(job.config)
        return ml.Result.OK(pair_pipeline(_PairRun(cfg, job.pair_id)))
    except Exception as exc:
        _logger.exception("pair %d failed", job.pair_id)
        return ml.Result.ERR(exc)


def run_pair(job: PairJob) -> PairOutcome:
    """Runs one pair unless its outputs already exist.

    Never raises: a failure is reported in the outcome. The outcome is a plain tuple
    so it can cross process boundaries.
    """
    out_dir = job.config["out_dir"]
    if is_complete(out_dir, job.pair_id):
        _logger.info("pair %d already complete, skipping", job.pair_id)
        return PairOutcome(job.pair_id, "completed", pair_artifacts(job.pair_id), 0.0, "")

    started = time.perf_counter()
    result = _attempt(job)
    seconds = time.perf_counter() - started

    return (
        ml.match(result)
        .case(
            ml.Result.OK(Any),
            do=lambda files: PairOutcome(job.pair_id, "completed", files, seconds, ""),
        )
        .case(
            ml.Result.ERR(Exception),
            do=lambda exc: PairOutcome(job.pair_id, "failed", {}, seconds, repr(exc)),
        )
    )()


def _dispatch(jobs: List[PairJob], processes: int) -> List[PairOutcome]:
    if processes <= 1 or len(jobs) <= 1:
        return [run_pair(job) for job in jobs]

    with multiprocessing.Pool(processes=min(processes, len(jobs))) as pool:
        return list(pool.imap(run_pair, jobs))


def _concat_csv(paths: Sequence[Path]) -> str:
    """Joins CSV files sharing one header, keeping the first header only."""
    chunks = []
    for i, path in enumerate(paths):
        lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
        chunks.extend(lines if i == 0 else lines[1:])
    return "".join(chunks)


def aggregate_outputs(cfg: ExperimentConfig) -> List[int]:
    """Rewrites the run-level CSVs from every complete pair, in pair order.

    Returns:
        the ids of the pairs included
    """
    out_dir = Path(cfg.out_dir)
    done = [i for i in range(cfg.n_pairs) if is_complete(cfg.out_dir, i)]

    for name in AGGREGATES:
        paths = [out_dir / pair_artifacts(i)[name[: -len(".csv")]] for i in done]
        if paths:
            atomic_write_text(out_dir / name, _concat_csv(paths))
    return done


def write_manifest(cfg: ExperimentConfig, manifest: RunManifest):
    atomic_write_text(Path(cfg.out_dir) / "manifest.json", ml.to_json(manifest) + "\n")


def write_run_config(cfg: ExperimentConfig):
    out_dir = Path(cfg.out_dir)
    text = json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"
    atomic_write_text(out_dir / "config.json", text)
    write_lexicon(out_dir / "lexicon.tsv", cfg.inventory)


def run_experiment(
    cfg: ExperimentConfig, pair_ids: Optional[Sequence[int]] = None
) -> RunManifest:
    """Runs every pair of the experiment, or the chosen ones, and collects the outputs.

    Pairs already complete on disk are skipped. A pair that fails is recorded as
    failed in the manifest while the others carry on.

    Args:
        cfg: a validated configuration
        pair_ids: the pairs to run; defaults to all `n_pairs`

    Returns:
        the manifest, also written to `manifest.json`
    """
    started = time.perf_counter()
    pair_ids = list(range(cfg.n_pairs)) if pair_ids is None else sorted(set(pair_ids))
    write_run_config(cfg)

    raw = config_to_dict(cfg)
    jobs = [PairJob(raw, i) for i in pair_ids]
    _logger.info(
        "running %d pair(s) of %s with %d worker(s)",
        len(jobs),
        cfg.language.name,
        cfg.jobs,
    )
    outcomes = {o.pair_id: o for o in _dispatch(jobs, cfg.jobs)}

    statuses = []
    for i in range(cfg.n_pairs):
        if i in outcomes:
            o = outcomes[i]
            statuses.append(
                PairStatus(
                    pair_id=i,
                    status=o.status,
                    artifacts=dict(o.artifacts),
                    seconds=float(o.seconds),
                    error=o.error,
                )
            )
        elif is_complete(cfg.out_dir, i):
            statuses.append(
                PairStatus(
                    pair_id=i,
                    status="completed",
                    artifacts=pair_artifacts(i),
                    seconds=0.0,
                )
            )
        else:
            statuses.append(
                PairStatus(pair_id=i, status="pending", artifacts={}, seconds=0.0)
            )

    aggregate_outputs(cfg)
    manifest = RunManifest(
        config_hash=config_hash(cfg),
        n_pairs=cfg.n_pairs,
        pairs=statuses,
        seconds=float(time.perf_counter() - started),
    )
    write_manifest(cfg, manifest)

    if manifest.n_failed:
        _logger.warning("%d pair(s) failed", manifest.n_failed)
    return manifest


def generate_corpora(cfg: ExperimentConfig) -> List[Path]:
    """Writes every agent's reference corpus and the lexicon without training anything."""
    write_run_config(cfg)
    written = []
    for i in range(cfg.n_pairs):
        data, _ = build_pair_data(cfg, i)
        for k in (0, 1):
            path = Path(cfg.out_dir) / pair_artifacts(i)[f"corpus_{k}"]
            write_corpus(path, sorted(data.corpora[k].items()))
            written.append(path)
    return written


def reevaluate(cfg: ExperimentConfig, phases: Sequence[Phase] = tuple(PHASES)) -> pd.DataFrame:
    """Evaluates the stored checkpoints again, e.g. with different evaluation switches.

    The tidy rows of every complete pair are written to `reeval.csv`.
    """
    rows = []
    for i in range(cfg.n_pairs):
        if not is_complete(cfg.out_dir, i):
            continue
        data, _ = build_pair_data(cfg, i)
        files = pair_artifacts(i)
        for phase in phases:
            tag = phase.value.lower()
            agents = tuple(
                load_agent(Path(cfg.out_dir) / files[f"checkpoint_{tag}_{k}"])
                for k in (0, 1)
            )
            report = evaluate_pair(
                agents,
                data.test,
                data.test_corpora,
                cfg.language,
                phase,
                pair_id=i,
                cfg=cfg.evaluation,
                rng=eval_rng(cfg, i, phase),
            )
            rows.extend(tidy_rows(report))

    frame = pd.DataFrame(rows, columns=EVAL_COLUMNS)
    atomic_write_csv(frame, Path(cfg.out_dir) / "reeval.csv")
    return frame
