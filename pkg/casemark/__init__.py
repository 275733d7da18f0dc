"""Neural speaker/listener agents that learn miniature case-marking languages and reshape them
through communication.

Provides:

1. A meaning space of (action, agent, patient) triples where some entities may take either role,
   and probabilistic languages that vary word order (SOV or OSV) and an optional case marker.
2. GRU speakers and listeners on a small numpy substrate with exact backward passes and Adam.
3. Supervised learning of a reference corpus, then pairs of agents playing a meaning
   reconstruction game trained with REINFORCE, with regular self-communication turns.
4. Measurements of accuracy and of word-order and marker preferences, split by whether a
   meaning's entities are role-ambiguous.
5. An experiment runner spreading independent pairs over processes, writing CSV tables and
   SVG figures, and resuming where it left off.

Typical Usage:

    ```python
    import casemark as cm

    cfg = cm.default_config(n_pairs=4, jobs=4, out_dir="runs/demo")
    manifest = cm.run_experiment(cfg)
    ```
"""
from . import errors, nn
from .agents import (
    Agent,
    AgentConfig,
    DecodeMode,
    listen,
    load_agent,
    predict_meaning,
    save_agent,
    speak,
)
from .training import (
    RlConfig,
    SlConfig,
    TurnLog,
    interaction_turn,
    reward,
    run_rl,
    train_supervised,
)
from .evaluation import (
    EvalConfig,
    EvalReport,
    Phase,
    ProductionStats,
    aggregate_deltas,
    communication_accuracy,
    dcm_delta,
    evaluate_pair,
    listening_accuracy,
    production_preferences,
    speaking_accuracy,
    tidy_rows,
)
from .language import (
    AmbiguityClass,
    Condition,
    DEFAULT_INVENTORY,
    Inventory,
    LanguageSpec,
    Meaning,
    PRESETS,
    build_meaning_space,
    classify_ambiguity,
    generate_corpus,
    parse,
    resample_sl_subset,
    sample_utterance,
    split_dataset,
)
from .experiment import (
    ExperimentConfig,
    RunManifest,
    default_config,
    load_config,
    plot_accuracy,
    plot_preferences,
    run_experiment,
)

__all__ = [
    "nn",
    "Agent",
    "AgentConfig",
    "DecodeMode",
    "listen",
    "load_agent",
    "predict_meaning",
    "save_agent",
    "speak",
    "RlConfig",
    "SlConfig",
    "TurnLog",
    "interaction_turn",
    "reward",
    "run_rl",
    "train_supervised",
    "EvalConfig",
    "EvalReport",
    "Phase",
    "ProductionStats",
    "aggregate_deltas",
    "communication_accuracy",
    "dcm_delta",
    "evaluate_pair",
    "listening_accuracy",
    "production_preferences",
    "speaking_accuracy",
    "tidy_rows",
    "AmbiguityClass",
    "Condition",
    "DEFAULT_INVENTORY",
    "Inventory",
    "LanguageSpec",
    "Meaning",
    "PRESETS",
    "build_meaning_space",
    "classify_ambiguity",
    "generate_corpus",
    "parse",
    "resample_sl_subset",
    "sample_utterance",
    "split_dataset",
    "ExperimentConfig",
    "RunManifest",
    "default_config",
    "load_config",
    "plot_accuracy",
    "plot_preferences",
    "run_experiment",
    "errors",
]
