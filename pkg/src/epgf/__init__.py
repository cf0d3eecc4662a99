"""Segment-level protein sequence generation with biophysical selection."""

from .bioscore import METRICS, MetricReport, ScorerConfig, bioscore, score_many
from .core import Alphabet, GenerationConfig, ScoreScope, Segment, Sequence, make_sequence, validate_sequence
from .engine import GenerationTrace, baseline_generate, generate, probabilistic_filter, selection_probabilities
from .evaluation import ablation_report, nw_identity, score_set
from .model import NgramModel, UniformModel, next_distribution, perplexity, train_ngram

__version__ = "0.1.0"

__all__ = [
    "METRICS", "MetricReport", "ScorerConfig", "bioscore", "score_many",
    "Alphabet", "GenerationConfig", "ScoreScope", "Segment", "Sequence", "make_sequence", "validate_sequence",
    "GenerationTrace", "baseline_generate", "generate", "probabilistic_filter", "selection_probabilities",
    "ablation_report", "nw_identity", "score_set",
    "NgramModel", "UniformModel", "next_distribution", "perplexity", "train_ngram",
]
