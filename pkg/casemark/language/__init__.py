"""Meaning spaces, miniature languages and their corpora"""
from .meanings import (
    AMBIGUITY_CLASSES,
    AmbiguityClass,
    Condition,
    DEFAULT_INVENTORY,
    Inventory,
    Meaning,
    build_meaning_space,
    classify_ambiguity,
    free_role_entity,
    in_class,
)
from .grammar import (
    MAX_UTTERANCE_LEN,
    PRESETS,
    LanguageSpec,
    Order,
    Parse,
    Utterance,
    check_language_spec,
    expected_marking,
    generate_corpus,
    parse,
    render,
    sample_utterance,
)
from .datasets import coverage, resample_sl_subset, split_dataset
from .io import display, lexicon, read_corpus, read_lexicon, write_corpus, write_lexicon

__all__ = [
    "AMBIGUITY_CLASSES",
    "AmbiguityClass",
    "Condition",
    "DEFAULT_INVENTORY",
    "Inventory",
    "Meaning",
    "build_meaning_space",
    "classify_ambiguity",
    "free_role_entity",
    "in_class",
    "MAX_UTTERANCE_LEN",
    "PRESETS",
    "LanguageSpec",
    "Order",
    "Parse",
    "Utterance",
    "check_language_spec",
    "expected_marking",
    "generate_corpus",
    "parse",
    "render",
    "sample_utterance",
    "coverage",
    "resample_sl_subset",
    "split_dataset",
    "display",
    "lexicon",
    "read_corpus",
    "read_lexicon",
    "write_corpus",
    "write_lexicon",
]
