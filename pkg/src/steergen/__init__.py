"""Attribute-steered text generation with class-conditioned n-gram models.

A base n-gram language model proposes next tokens; one discriminator per
attribute re-weights the proposal through Bayes-rule class posteriors raised
to per-attribute control weights. The package covers the full loop: corpus
handling, model training and selection, guided decoding, evaluation metrics,
an HTTP control service, and a CLI for end-to-end experiments.
"""

__version__ = "0.1.0"

from .corpus import (
    AttributeRecord,
    PairRecord,
    SplitSpec,
    TokenSequence,
    Vocabulary,
    build_vocab,
    detokenize,
    load_attribute_records,
    load_pairs,
    split,
    tokenize,
)
from .decoding import (
    AttributeControl,
    CandidateTrace,
    GenerationConfig,
    apply_filters,
    combine,
    generate,
)
from .experiment import (
    ExperimentSpec,
    SpecError,
    TrainedWorld,
    load_spec,
    load_world,
    run_ablate,
    run_eval,
    run_generate,
    run_train,
)
from .metrics import BowScorer, MetricsReport, bleu2, classifier_metrics, diversity, novelty
from .ngram import BaseLM, ClassConditionedLM, LossConfig, Smoothing, losses, perplexity, train_base, train_cclm
from .posterior import PosteriorConfig, PosteriorState, PosteriorTracker, class_posteriors
from .service import ModelRegistry, ServiceConfig, SessionLog, create_app

__all__ = [
    "AttributeControl",
    "AttributeRecord",
    "BaseLM",
    "BowScorer",
    "CandidateTrace",
    "ClassConditionedLM",
    "ExperimentSpec",
    "GenerationConfig",
    "LossConfig",
    "MetricsReport",
    "ModelRegistry",
    "PairRecord",
    "PosteriorConfig",
    "PosteriorState",
    "PosteriorTracker",
    "ServiceConfig",
    "SessionLog",
    "Smoothing",
    "SpecError",
    "SplitSpec",
    "TokenSequence",
    "TrainedWorld",
    "Vocabulary",
    "apply_filters",
    "bleu2",
    "build_vocab",
    "classifier_metrics",
    "combine",
    "create_app",
    "detokenize",
    "diversity",
    "generate",
    "load_attribute_records",
    "load_pairs",
    "load_spec",
    "load_world",
    "losses",
    "novelty",
    "perplexity",
    "run_ablate",
    "run_eval",
    "run_generate",
    "run_train",
    "split",
    "tokenize",
    "train_base",
    "train_cclm",
]
