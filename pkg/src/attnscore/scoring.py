"""Trial scoring: average-pooling baseline and attention-weighted frame scoring.

The baseline pools frames into a d-vector and takes the cosine of the pooled
vectors.  Attention scoring computes, for every test frame, a weighted mean of
its cosines against all enrollment frames and averages those per-frame scores
over the test utterance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from attnscore.attention import (
    AffinityConfig,
    AttentionError,
    AttentionMatrix,
    attention_features,
    build_attention,
)
from attnscore.features import FeatureMatrix, Manifest, UtteranceRecord

SYSTEMS = ("baseline", "att-spk", "att-post", "att-bn")
METRICS = ("cosine", "lda-cosine")

# Affinity source implied by each attention system
SYSTEM_SOURCE = {
    "att-spk": "speaker-dist",
    "att-post": "posterior-kl",
    "att-bn": "bottleneck-dist",
}


class ScoringError(ValueError):
    """Invalid scoring input or configuration."""


@dataclass(frozen=True)
class TrialScore:
    value: float
    system: str
    metric: str


@dataclass(frozen=True)
class ScoringConfig:
    """Which system variant and frame-level metric to score with."""

    system: str = "baseline"
    metric: str = "cosine"
    symmetrize: bool = False
    affinity: AffinityConfig = field(default=None)
    lda: object = None

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ScoringError(f"unknown system {self.system!r}")
        if self.metric not in METRICS:
            raise ScoringError(f"unknown metric {self.metric!r}")
        if self.metric == "lda-cosine" and self.lda is None:
            raise ScoringError("metric 'lda-cosine' requires an LDA transform")
        if self.system == "baseline":
            return
        source = SYSTEM_SOURCE[self.system]
        if self.affinity is None:
            object.__setattr__(self, "affinity", AffinityConfig(source=source))
        elif self.affinity.source != source:
            raise ScoringError(f"system {self.system!r} requires affinity source "
                               f"{source!r}, got {self.affinity.source!r}")


def cosine(a, b) -> float:
    """Cosine similarity of two nonzero vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ScoringError(f"vector length mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ScoringError("cosine of zero-norm vector")
    return float(np.dot(a, b) / (na * nb))


def pool_average(frames: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Column-wise mean of a frame matrix (the d-vector)."""
    arr = frames.data if isinstance(frames, FeatureMatrix) else np.asarray(frames, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ScoringError("cannot pool an empty frame set")
    return arr.mean(axis=0)


def score_inner_product_pooled(enroll, test) -> float:
    """Mean of pairwise frame inner products; equals the pooled-mean inner product."""
    e = enroll.data if isinstance(enroll, FeatureMatrix) else np.asarray(enroll, dtype=np.float64)
    t = test.data if isinstance(test, FeatureMatrix) else np.asarray(test, dtype=np.float64)
    if e.shape[1] != t.shape[1]:
        raise ScoringError(f"dimension mismatch: {e.shape[1]} vs {t.shape[1]}")
    return float((e @ t.T).sum() / (e.shape[0] * t.shape[0]))


def _project(frames: np.ndarray, lda) -> np.ndarray:
    return frames if lda is None else lda.transform(frames)


def _unit_rows(frames: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(frames, axis=1)
    if np.any(norms == 0.0):
        raise ScoringError("zero-norm frame under cosine")
    return frames / norms[:, None]


def score_baseline(enroll, test, metric: str = "cosine", lda=None) -> TrialScore:
    """Cosine between pooled (optionally LDA-projected) frame means."""
    e = enroll.data if isinstance(enroll, FeatureMatrix) else np.asarray(enroll, dtype=np.float64)
    t = test.data if isinstance(test, FeatureMatrix) else np.asarray(test, dtype=np.float64)
    if metric == "lda-cosine":
        e, t = _project(e, lda), _project(t, lda)
    value = cosine(pool_average(e), pool_average(t))
    return TrialScore(value, "baseline", metric)


def attention_score(enroll_spk: np.ndarray, test_spk: np.ndarray,
                    alpha: AttentionMatrix, lda=None) -> float:
    """Mean over test frames of the attention-weighted enrollment cosines."""
    e = _unit_rows(_project(enroll_spk, lda))
    t = _unit_rows(_project(test_spk, lda))
    cos = t @ e.T  # T' x T
    return float((alpha.weights * cos).sum() / t.shape[0])


def _concat_pool(records: list[UtteranceRecord], need_phonetic: bool) -> tuple:
    """Row-concatenate enrollment utterances into one frame pool."""
    spk = np.concatenate([r.speaker_feats.data for r in records], axis=0)
    phon = None
    if need_phonetic:
        missing = [r.utt_id for r in records if r.phonetic_feats is None]
        if missing:
            raise ScoringError(f"utterances missing phonetic features: {missing}")
        kinds = {r.phonetic_feats.kind for r in records}
        dims = {r.phonetic_feats.cols for r in records}
        if len(kinds) > 1 or len(dims) > 1:
            raise ScoringError("inconsistent phonetic feature kinds or dimensions in pool")
        phon = np.concatenate([r.phonetic_feats.data for r in records], axis=0)
    return spk, phon


def score_attention(enroll_records: list[UtteranceRecord], test: UtteranceRecord,
                    cfg: ScoringConfig) -> TrialScore:
    """Attention-weighted score of a test utterance against an enrollment pool."""
    if cfg.system == "baseline":
        raise ScoringError("score_attention called with baseline config")
    source = cfg.affinity.source
    need_phon = source != "speaker-dist"
    enroll_spk, enroll_phon = _concat_pool(enroll_records, need_phon)
    test_aff = attention_features(test, cfg.affinity).data
    enroll_aff = enroll_spk if source == "speaker-dist" else enroll_phon
    test_spk = test.speaker_feats.data

    alpha = build_attention(test_aff, enroll_aff, cfg.affinity)
    d = attention_score(enroll_spk, test_spk, alpha, cfg.lda)
    if cfg.symmetrize:
        alpha_rev = build_attention(enroll_aff, test_aff, cfg.affinity)
        d_rev = attention_score(test_spk, enroll_spk, alpha_rev, cfg.lda)
        d = 0.5 * (d + d_rev)
    return TrialScore(d, cfg.system, cfg.metric)


def score_trial(trial, manifest: Manifest, cfg: ScoringConfig) -> TrialScore:
    """Score one trial against a manifest-backed utterance store."""
    enroll = [manifest.get(u) for u in trial.enroll_ids]
    test = manifest.get(trial.test_id)
    if cfg.system == "baseline":
        pool, _ = _concat_pool(enroll, need_phonetic=False)
        return score_baseline(pool, test.speaker_feats, cfg.metric, cfg.lda)
    try:
        return score_attention(enroll, test, cfg)
    except AttentionError as e:
        raise ScoringError(str(e)) from None
