"""Disinformation analytics toolkit (C++ core)."""

from ._core import (
    DisinfoError,
    ParseError,
    ValidationError,
    analyze_users,
    association_rules,
    build_prompt,
    default_config,
    emit_finetune_config,
    generate_synthetic,
    is_bot_account,
    load_corpus,
    mine_frequent,
    parse_entity_sentiments,
    run_stage,
    save_corpus,
    sha256_hex,
    tasks,
    thematic_series,
    truncated_svd,
)

__all__ = [
    "DisinfoError",
    "ParseError",
    "ValidationError",
    "analyze_users",
    "association_rules",
    "build_prompt",
    "default_config",
    "emit_finetune_config",
    "generate_synthetic",
    "is_bot_account",
    "load_corpus",
    "mine_frequent",
    "parse_entity_sentiments",
    "run_stage",
    "save_corpus",
    "sha256_hex",
    "tasks",
    "thematic_series",
    "truncated_svd",
]
