"""Command-line entry point.

    casemark run --preset neutral-subj --pairs 10 --jobs 4
    casemark plot --out runs/neutral-subj

Exit codes: 0 on success, 1 when the configuration or an input table is unusable,
2 when some pairs failed.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, List, Optional

import funml as ml

from casemark.errors import CasemarkError, ConfigError
from casemark.evaluation import PHASES, Phase
from casemark.language import PRESETS
from casemark.utils import read_table
from .config import ExperimentConfig, load_config
from .plots import ACCURACY_COLUMNS, PREFERENCE_COLUMNS, plot_accuracy, plot_preferences
from .report import format_report, write_report
from .runner import RunManifest, generate_corpora, reevaluate, run_experiment

_logger = logging.getLogger("casemark")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PAIRS_FAILED = 2

_PHASE_NAMES = {phase.value.lower(): phase for phase in PHASES}


def _common_flags() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", type=Path, help="JSON configuration file")
    parser.add_argument("--seed", type=int, dest="base_seed", help="base seed")
    parser.add_argument("--pairs", type=int, dest="n_pairs", help="number of agent pairs")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="initial language")
    parser.add_argument("--jobs", type=int, help="worker processes")
    parser.add_argument("--out", dest="out_dir", help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every turn")
    return parser


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="casemark",
        description="Speaker/listener agents learning and reshaping case-marking languages.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("generate", parents=[common], help="write the reference corpora")
    train = commands.add_parser("train", parents=[common], help="train and evaluate one pair")
    train.add_argument("--pair", type=int, required=True, help="pair id")
    commands.add_parser("run", parents=[common], help="run every pair")
    evaluate = commands.add_parser("eval", parents=[common], help="re-evaluate checkpoints")
    evaluate.add_argument(
        "--phase", choices=sorted(_PHASE_NAMES), help="only this checkpoint (default both)"
    )
    commands.add_parser("plot", parents=[common], help="draw SVG figures of a run")
    commands.add_parser("report", parents=[common], help="aggregate statistics of a run")
    return parser


def _exit_code(manifest: RunManifest) -> int:
    return EXIT_PAIRS_FAILED if manifest.n_failed else EXIT_OK


def _generate(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    written = generate_corpora(cfg)
    _logger.info("wrote %d corpus file(s) to %s", len(written), cfg.out_dir)
    return EXIT_OK


def _train(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    if not 0 <= args.pair < cfg.n_pairs:
        raise ConfigError("pair", f"must lie in [0, {cfg.n_pairs}), got {args.pair}")
    return _exit_code(run_experiment(cfg, pair_ids=[args.pair]))


def _run(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    return _exit_code(run_experiment(cfg))


def _eval(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    phases: List[Phase] = [_PHASE_NAMES[args.phase]] if args.phase else list(PHASES)
    frame = reevaluate(cfg, phases)
    _logger.info("re-evaluated %d row(s) into %s/reeval.csv", len(frame), cfg.out_dir)
    return EXIT_OK


def _plot(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out_dir = Path(cfg.out_dir)
    plot_preferences(
        read_table(out_dir / "eval.csv", PREFERENCE_COLUMNS),
        cfg.language,
        out_dir / "preferences.svg",
    )
    plot_accuracy(
        read_table(out_dir / "accuracy.csv", ACCURACY_COLUMNS), out_dir / "accuracy.svg"
    )
    _logger.info("wrote figures to %s", out_dir)
    return EXIT_OK


def _report(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    report = write_report(cfg.out_dir, seed=cfg.base_seed)
    print(format_report(report))
    return EXIT_OK


_COMMANDS: dict = {
    "generate": _generate,
    "train": _train,
    "run": _run,
    "eval": _eval,
    "plot": _plot,
    "report": _report,
}


def _execute(command: Callable[[ExperimentConfig, argparse.Namespace], int], args: Any):
    def go(cfg: ExperimentConfig) -> int:
        try:
            return command(cfg, args)
        except (CasemarkError, FileNotFoundError) as exc:
            _logger.error("%s", exc)
            return EXIT_CONFIG

    return go


def _reject(exc: ConfigError) -> int:
    _logger.error("%s", exc)
    return EXIT_CONFIG


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    overrides = {
        key: getattr(args, key)
        for key in ("base_seed", "n_pairs", "preset", "jobs", "out_dir")
    }
    result = load_config(args.config, overrides)

    return (
        ml.match(result)
        .case(ml.Result.OK(Any), do=_execute(_COMMANDS[args.command], args))
        .case(ml.Result.ERR(Exception), do=_reject)
    )()


if __name__ == "__main__":
    sys.exit(main())
