"""Python bindings for the hyperscene library."""

from ._hyperscene import (
    EnrichedHypergraph,
    Hypergraph,
    IoError,
    NumericError,
    ParseError,
    Scene,
    ValidationError,
    assemble_prompt,
    build_hypergraph,
    enrich,
    evaluate_plan,
    export_xml,
    grad_check,
    lcs_score,
    load_enriched,
    load_scene,
    parse_enriched,
    parse_scene,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
