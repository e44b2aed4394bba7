"""Ensemble optimization of well controls with adaptive neural surrogates."""

from ._amlopt import (
    ArtifactError,
    ParameterError,
    PreconditionError,
    SimulationError,
    StructuralError,
    adapt_covariance,
    analytic_names,
    analytic_value,
    check_deck,
    compare,
    constant_controls,
    discount_vector,
    enopt,
    initial_covariance,
    parse_config,
    project,
    run,
    scale_to_unit,
    search_direction,
    simulate,
    summarize,
    unscale_from_unit,
)

__all__ = [
    "ArtifactError",
    "ParameterError",
    "PreconditionError",
    "SimulationError",
    "StructuralError",
    "adapt_covariance",
    "analytic_names",
    "analytic_value",
    "check_deck",
    "compare",
    "constant_controls",
    "discount_vector",
    "enopt",
    "initial_covariance",
    "parse_config",
    "project",
    "run",
    "scale_to_unit",
    "search_direction",
    "simulate",
    "summarize",
    "unscale_from_unit",
]
