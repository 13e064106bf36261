"""Batched beam-search decoding with streaming batch refill.

The package separates the search itself (greedy and beam expansion with two
finalization policies), the batching strategies that drive it over an input
stream, pluggable deterministic scorers, a hardware-free step cost model,
and an experiment harness with a CLI front end.
"""

from .core import (
    Beam,
    Candidate,
    DecodeConfig,
    FinalizationPolicy,
    Proposal,
    Vocabulary,
    extend,
    top_k_select,
)
from .errors import ConfigError, DataError, InvariantViolation
from .heuristics import (
    HeuristicConfig,
    absolute_threshold_filter,
    apply_heuristics,
    max_candidates_filter,
)
from .harness import (
    ENGINES,
    Corpus,
    ExperimentConfig,
    ResultsDocument,
    SyntheticCorpusSpec,
    bucket_by_length,
    dispatch_engine,
    generate_synthetic_corpus,
    load_corpus,
    run_experiment,
    save_corpus,
)
from .metrics import MetricsReport, StepRecord, round_half_up
from .model import (
    CostParams,
    Encoding,
    NgramTableScorer,
    Scorer,
    ScorerSpec,
    SeededHashScorer,
    step_cost,
)
from .scheduler import (
    BatchState,
    BeamSlot,
    StepEvent,
    StepSelection,
    flush_all,
    refill,
    run_varbeam,
    run_varfifo,
    run_varstream,
    select_fifo_max_lt,
    select_min_lt,
)
from .search import (
    advance_beam,
    beam_decode,
    beam_finished,
    expand_beam,
    greedy_decode,
)

__version__ = "0.1.0"

__all__ = [
    "Beam",
    "BatchState",
    "BeamSlot",
    "Candidate",
    "ConfigError",
    "Corpus",
    "CostParams",
    "DataError",
    "DecodeConfig",
    "ENGINES",
    "Encoding",
    "ExperimentConfig",
    "FinalizationPolicy",
    "HeuristicConfig",
    "InvariantViolation",
    "MetricsReport",
    "NgramTableScorer",
    "Proposal",
    "ResultsDocument",
    "Scorer",
    "ScorerSpec",
    "SeededHashScorer",
    "StepEvent",
    "StepRecord",
    "StepSelection",
    "SyntheticCorpusSpec",
    "Vocabulary",
    "absolute_threshold_filter",
    "advance_beam",
    "apply_heuristics",
    "beam_decode",
    "beam_finished",
    "bucket_by_length",
    "dispatch_engine",
    "expand_beam",
    "extend",
    "flush_all",
    "generate_synthetic_corpus",
    "greedy_decode",
    "load_corpus",
    "max_candidates_filter",
    "refill",
    "round_half_up",
    "run_experiment",
    "run_varbeam",
    "run_varfifo",
    "run_varstream",
    "save_corpus",
    "select_fifo_max_lt",
    "select_min_lt",
    "step_cost",
    "top_k_select",
]
