"""Attention-based d-vector scoring toolkit for speaker verification."""

from attnscore.features import (
    FeatureMatrix,
    Manifest,
    UtteranceRecord,
    load_feature_matrix,
    load_manifest,
    save_feature_matrix,
)
from attnscore.attention import AffinityConfig, AttentionMatrix, build_attention, kl_divergence
from attnscore.scoring import ScoringConfig, TrialScore, score_trial
from attnscore.lda import FisherLda, load_lda, save_lda
from attnscore.evaluation import EvalResult, Trial, compute_eer, parse_trials, run_eval
from attnscore.synth import SynthConfig, generate_corpus, write_corpus

__all__ = [
    "AffinityConfig",
    "AttentionMatrix",
    "EvalResult",
    "FeatureMatrix",
    "FisherLda",
    "Manifest",
    "ScoringConfig",
    "SynthConfig",
    "Trial",
    "TrialScore",
    "UtteranceRecord",
    "build_attention",
    "compute_eer",
    "generate_corpus",
    "kl_divergence",
    "load_feature_matrix",
    "load_lda",
    "load_manifest",
    "parse_trials",
    "run_eval",
    "save_feature_matrix",
    "save_lda",
    "score_trial",
    "write_corpus",
]

__version__ = "0.1.0"
