"""Structured syntax models with invertible neural projections."""

from ._synflow import (
    Error,
    Flow,
    Model,
    directed_accuracy,
    dmv_log_marginal,
    dmv_viterbi,
    init_flow,
    load_model,
    many_to_one,
    markov_log_marginal,
    markov_viterbi,
    one_to_one,
    run_cli,
    v_measure,
    viterbi_em,
)

__all__ = [
    "Error",
    "Flow",
    "Model",
    "directed_accuracy",
    "dmv_log_marginal",
    "dmv_viterbi",
    "init_flow",
    "load_model",
    "many_to_one",
    "markov_log_marginal",
    "markov_viterbi",
    "one_to_one",
    "run_cli",
    "v_measure",
    "viterbi_em",
]
