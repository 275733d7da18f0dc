import json
from pathlib import Path
from typing import Any

import pandas as pd
import pytest
import funml as ml

from casemark.errors import ConfigError, SchemaError
from casemark.evaluation import EVAL_COLUMNS, PHASES, Phase
from casemark.experiment import (
    build_config,
    build_pair_data,
    config_hash,
    config_to_dict,
    generate_corpora,
    load_config,
    pair_artifacts,
    plot_accuracy,
    plot_preferences,
    reevaluate,
    run_experiment,
    write_report,
)
from casemark.experiment.cli import EXIT_CONFIG, EXIT_OK, main
from casemark.experiment.plots import ACCURACY_COLUMNS
from casemark.experiment.runner import agent_rng, data_rng, eval_rng, pair_rng
from casemark.language import Condition, read_corpus
from casemark.utils import read_table
from tests import conftest

RUN_FILES = ["eval.csv", "turns.csv", "accuracy.csv", "sl_curve.csv"]


def config_or_raise(result: ml.Result):
    """The config inside an OK result; re-raises the error inside an ERR one."""

    def fail(exc: Exception):
        raise exc

    return (
        ml.match(result)
        .case(ml.Result.OK(Any), do=lambda cfg: cfg)
        .case(ml.Result.ERR(Exception), do=fail)
    )()


def run_bytes(out_dir) -> dict:
    """Every CSV a run leaves behind, by path relative to the output directory."""
    return {
        str(p.relative_to(out_dir)): p.read_bytes()
        for p in sorted(out_dir.rglob("*.csv"))
    }


def test_empty_config_is_the_published_setup():
    """an empty object gives the defaults and an output directory named after the preset"""
    cfg = build_config({})

    assert cfg.preset == "dominant-obj"
    assert cfg.language.name == "dominant-obj"
    assert cfg.n_pairs == 50
    assert cfg.out_dir == "runs/dominant-obj"
    assert cfg.inventory.n_amb == 10
    assert cfg.rl.inter_turns == 200
    assert cfg.evaluation.filter_wellformed


def test_config_errors_name_the_key():
    """unknown keys, wrong types and out-of-range values are rejected with the key named"""
    test_data = [
        # raw, offending key
        ({"bogus": 1}, "bogus"),
        ({"n_pairs": "3"}, "n_pairs"),
        ({"n_pairs": 0}, "n_pairs"),
        ({"preset": "nope"}, "preset"),
        ({"sl": {"epochs": 0}}, "sl.epochs"),
        ({"sl": {"momentum": 0.9}}, "sl.momentum"),
        ({"agent": {"hidden_dim": 1.5}}, "agent.hidden_dim"),
        ({"evaluation": {"sampled": 1}}, "evaluation.sampled"),
        ({"language": {"p_sov": 1.5}}, "language.p_sov"),
        ({"language": {"condition": "verb"}}, "language.condition"),
        ({"test_fraction": 1.0}, "test_fraction"),
        ({"rl": {"listener_update": "adam"}}, "rl.listener_update"),
        ([1, 2], "config"),
    ]

    for raw, key in test_data:
        with pytest.raises(ConfigError) as info:
            build_config(raw)
        assert info.value.key == key


def test_custom_language():
    """a language section overrides the preset's probabilities and is labelled custom"""
    cfg = build_config({"preset": "neutral-subj", "language": {"p_sov": 0.9}})

    assert cfg.language.name == "custom"
    assert cfg.language.p_sov == 0.9
    assert cfg.language.condition == Condition.SUBJECT
    assert cfg.language.p_mk_given_osv == 0.67

    named = build_config({"language": {"condition": "subject", "name": "mine"}})
    assert named.language.name == "mine"
    assert named.language.condition == Condition.SUBJECT


def test_integers_widen_to_floats():
    """integer JSON values are accepted for float settings"""
    cfg = build_config({"rl": {"learning_rate": 1}, "language": {"p_sov": 1}})
    assert cfg.rl.learning_rate == 1.0
    assert isinstance(cfg.language.p_sov, float)


def test_load_config_file_and_overrides(tmp_path):
    """overrides win over the file; a preset override drops the file's language"""
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"n_pairs": 4, "language": {"p_sov": 0.8}}))

    from_file = config_or_raise(load_config(path))
    assert from_file.n_pairs == 4
    assert from_file.language.p_sov == 0.8

    overridden = config_or_raise(
        load_config(path, {"n_pairs": 7, "preset": "neutral-obj", "jobs": None})
    )
    assert overridden.n_pairs == 7
    assert overridden.jobs == 1
    assert overridden.language.name == "neutral-obj"


def test_load_config_errors_are_results(tmp_path):
    """unreadable or invalid files come back as Result.ERR, never raised"""
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    bad_value = tmp_path / "value.json"
    bad_value.write_text(json.dumps({"jobs": -1}))
    test_data = [
        # path, offending key
        (tmp_path / "missing.json", "config"),
        (bad_json, "config"),
        (bad_value, "jobs"),
    ]

    for path, key in test_data:
        result = load_config(path)
        assert not ml.is_ok(result)
        with pytest.raises(ConfigError) as info:
            config_or_raise(result)
        assert info.value.key == key


def test_config_round_trips_through_dict():
    """the dictionary form of a config builds the same config"""
    cfg = conftest.toy_config("out")
    assert build_config(config_to_dict(cfg)) == cfg


def test_config_hash():
    """the hash ignores the output directory and worker count but not the seed"""
    cfg = conftest.toy_config("a")
    assert config_hash(cfg) == config_hash(conftest.toy_config("b", jobs=4))
    assert config_hash(cfg) != config_hash(conftest.toy_config("a", base_seed=1))


def test_pair_data_is_seeded():
    """a pair's split and corpora depend only on the seeds; pairs differ"""
    cfg = conftest.toy_config("out")
    first, _ = build_pair_data(cfg, 0)
    again, _ = build_pair_data(cfg, 0)
    other, _ = build_pair_data(cfg, 1)

    assert first == again
    assert sorted(first.train + first.test) == first.space
    assert first.corpora != other.corpora
    for k in (0, 1):
        assert {m for m, _ in first.test_corpora[k]} == set(first.test)
        assert {m for m, _ in first.sl_corpora[k]} <= set(first.train)


def test_random_streams_are_distinct():
    """no two generators of a run share a draw sequence, including pair 0 and seed 0"""
    test_data = [
        # base_seed
        0,
        5,
        12345,
    ]

    for base_seed in test_data:
        cfg = conftest.toy_config("out", base_seed=base_seed)
        generators = []
        for pair_id in range(3):
            generators.append(pair_rng(cfg, pair_id))
            generators.extend(eval_rng(cfg, pair_id, phase) for phase in PHASES)
            for k in (0, 1):
                generators.append(agent_rng(cfg, pair_id, k))
                generators.append(data_rng(cfg, pair_id, k))

        draws = {tuple(rng.random(4)) for rng in generators}
        assert len(draws) == len(generators) == 3 * 7


def test_generate_corpora(tmp_path):
    """every agent's corpus is written and reads back with one utterance per meaning"""
    cfg = conftest.toy_config(str(tmp_path))
    paths = generate_corpora(cfg)
    data, _ = build_pair_data(cfg, 1)

    assert len(paths) == 2 * cfg.n_pairs
    assert (tmp_path / "lexicon.tsv").exists()
    corpus = read_corpus(tmp_path / pair_artifacts(1)["corpus_0"])
    assert dict(corpus) == data.corpora[0]


def test_run_experiment(tmp_path):
    """a toy run completes every pair and writes per-pair and aggregated tables"""
    cfg = conftest.toy_config(str(tmp_path))
    manifest = run_experiment(cfg)

    assert [p.status for p in manifest.pairs] == ["completed", "completed"]
    assert manifest.n_failed == 0
    for name in RUN_FILES + ["config.json", "manifest.json", "lexicon.tsv"]:
        assert (tmp_path / name).exists()
    for pair_id in range(cfg.n_pairs):
        for path in pair_artifacts(pair_id).values():
            assert (tmp_path / path).exists()

    rows = read_table(tmp_path / "eval.csv", EVAL_COLUMNS)
    assert list(rows.columns) == EVAL_COLUMNS
    assert len(rows) == cfg.n_pairs * 2 * 3 * 2
    assert sorted(rows["phase"].unique()) == ["POST_RL", "POST_SL"]

    turns = pd.read_csv(tmp_path / "turns.csv")
    assert len(turns) == cfg.n_pairs * cfg.rl.inter_turns
    assert turns["self_play"].sum() == cfg.n_pairs * 2

    accuracy = pd.read_csv(tmp_path / "accuracy.csv")
    assert sorted(accuracy["turn"].unique()) == [0, 2, 4, 6]

    written = json.loads((tmp_path / "manifest.json").read_text())
    assert written["config_hash"] == config_hash(cfg)
    assert json.loads((tmp_path / "config.json").read_text()) == config_to_dict(cfg)


@pytest.mark.parametrize("base_seed", [0, 42])
def test_runs_are_reproducible(tmp_path, base_seed):
    """the same config in a new directory gives byte-identical tables"""
    first = tmp_path / "first"
    second = tmp_path / "second"
    run_experiment(conftest.toy_config(str(first), base_seed=base_seed))
    run_experiment(conftest.toy_config(str(second), base_seed=base_seed))

    assert run_bytes(first) == run_bytes(second)


def test_parallel_run_matches_serial(tmp_path):
    """spreading pairs over worker processes does not change any output"""
    serial = tmp_path / "serial"
    parallel = tmp_path / "parallel"
    run_experiment(conftest.toy_config(str(serial)))
    run_experiment(conftest.toy_config(str(parallel), jobs=2))

    assert run_bytes(serial) == run_bytes(parallel)


def test_run_resumes(tmp_path):
    """a pair with missing outputs is rerun and ends up byte-identical; complete pairs are skipped"""
    cfg = conftest.toy_config(str(tmp_path))
    run_experiment(cfg)
    before = run_bytes(tmp_path)
    checkpoint = tmp_path / pair_artifacts(0)["checkpoint_post_rl_0"]
    stamp = checkpoint.stat().st_mtime_ns

    (tmp_path / pair_artifacts(1)["eval"]).unlink()
    (tmp_path / pair_artifacts(1)["turns"]).unlink()
    manifest = run_experiment(cfg)

    assert manifest.n_failed == 0
    assert run_bytes(tmp_path) == before
    assert checkpoint.stat().st_mtime_ns == stamp


def test_selected_pairs(tmp_path):
    """running one pair leaves the other pending and aggregates what is complete"""
    cfg = conftest.toy_config(str(tmp_path))
    manifest = run_experiment(cfg, pair_ids=[1])

    assert [p.status for p in manifest.pairs] == ["pending", "completed"]
    rows = pd.read_csv(tmp_path / "eval.csv")
    assert set(rows["pair_id"]) == {1}


def test_reevaluate_matches_run(tmp_path):
    """re-evaluating stored checkpoints with the same switches reproduces the run's rows"""
    cfg = conftest.toy_config(str(tmp_path))
    run_experiment(cfg)

    frame = reevaluate(cfg)
    assert (tmp_path / "reeval.csv").exists()
    pd.testing.assert_frame_equal(
        pd.read_csv(tmp_path / "reeval.csv"), pd.read_csv(tmp_path / "eval.csv")
    )

    only_sl = reevaluate(cfg, [Phase.POST_SL])
    assert set(only_sl["phase"]) == {"POST_SL"}
    assert len(only_sl) == len(frame) // 2


def test_plots_and_report(tmp_path):
    """figures are deterministic SVGs and the report tables are written"""
    cfg = conftest.toy_config(str(tmp_path))
    run_experiment(cfg)
    rows = read_table(tmp_path / "eval.csv", EVAL_COLUMNS)
    accuracy = read_table(tmp_path / "accuracy.csv", ACCURACY_COLUMNS)

    first = plot_preferences(rows, cfg.language, tmp_path / "a.svg").read_bytes()
    again = plot_preferences(rows, cfg.language, tmp_path / "b.svg").read_bytes()
    assert first == again
    assert b"<svg" in first
    assert b"<svg" in plot_accuracy(accuracy, tmp_path / "acc.svg").read_bytes()

    report = write_report(tmp_path)
    for name in ("report.csv", "deltas_summary.csv", "slopes.csv"):
        assert (tmp_path / name).exists()
    assert set(report.deltas["delta"]) == {"d_marked", "d_sov"}
    assert len(report.slopes) == 6


def test_plots_reject_missing_columns(tmp_path):
    """tables without the needed columns raise SchemaError naming them"""
    test_data = [
        # plot, frame, missing column
        (lambda f, p: plot_accuracy(f, p), pd.DataFrame({"turn": [0]}), "accuracy"),
        (
            lambda f, p: plot_preferences(f, build_config({}).language, p),
            pd.DataFrame({"p_sov": [0.5]}),
            "p_marked",
        ),
    ]

    for plot, frame, column in test_data:
        with pytest.raises(SchemaError) as info:
            plot(frame, tmp_path / "x.svg")
        assert column in info.value.missing
        assert not (tmp_path / "x.svg").exists()


def test_report_requires_eval_table(tmp_path):
    """a run directory without eval.csv is an error"""
    with pytest.raises(FileNotFoundError):
        write_report(tmp_path)


def write_config(tmp_path, **overrides) -> str:
    path = tmp_path / "cfg.json"
    cfg = conftest.toy_config(str(tmp_path / "run"), **overrides)
    path.write_text(json.dumps(config_to_dict(cfg)))
    return str(path)


def test_cli_exit_codes(tmp_path):
    """invalid configurations exit with 1; runs and follow-up commands exit with 0"""
    config = write_config(tmp_path)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_pairs": 0}))
    test_data = [
        # argv, expected exit code
        (["run", "--config", str(bad)], EXIT_CONFIG),
        (["run", "--config", str(tmp_path / "missing.json")], EXIT_CONFIG),
        (["train", "--config", config, "--pair", "5"], EXIT_CONFIG),
        (["plot", "--config", config], EXIT_CONFIG),
        (["generate", "--config", config], EXIT_OK),
        (["train", "--config", config, "--pair", "0"], EXIT_OK),
        (["run", "--config", config], EXIT_OK),
        (["eval", "--config", config, "--phase", "post_rl"], EXIT_OK),
        (["plot", "--config", config], EXIT_OK),
        (["report", "--config", config], EXIT_OK),
    ]

    for argv, expected in test_data:
        assert main(argv) == expected, argv

    for name in ("preferences.svg", "accuracy.svg", "report.csv", "reeval.csv"):
        assert (tmp_path / "run" / name).exists()


def test_cli_overrides(tmp_path):
    """command-line flags override the configuration file"""
    config = write_config(tmp_path)
    out = tmp_path / "other"

    assert main(["generate", "--config", config, "--pairs", "1", "--out", str(out)]) == EXIT_OK
    assert sorted(p.name for p in (out / "pairs").iterdir()) == ["pair_000"]
    assert json.loads((out / "config.json").read_text())["n_pairs"] == 1


def test_shipped_config_spells_out_the_defaults():
    """the shipped configuration file is the empty configuration written out in full"""
    path = Path(__file__).parent.parent / "configs" / "published.json"
    assert config_or_raise(load_config(path)) == build_config({})


def test_plot_single_agent(tmp_path):
    """a single agent in one phase still gives a figure with its mean on top of it"""
    frame = pd.DataFrame(
        {
            "pair_id": [0, 0, 0],
            "agent_id": [0, 0, 0],
            "phase": ["POST_RL"] * 3,
            "ambiguity_class": ["ALL", "AMB", "NOT_AMB"],
            "p_sov": [1.0, 1.0, 1.0],
            "p_marked": [0.0, 0.0, 0.0],
        }
    )
    path = plot_preferences(frame, build_config({}).language, tmp_path / "one.svg")
    assert path.read_bytes().startswith(b"<?xml")
