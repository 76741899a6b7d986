"""Soft alignment of test frames onto enrollment frames.

Each test frame gets a row of nonnegative weights over the enrollment frames,
normalized to sum to 1.  For posterior features the affinity is the reciprocal
of the KL distance between the two frames' phone distributions; for bottleneck
or speaker features it is the reciprocal squared Euclidean distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from attnscore.features import FeatureMatrix, UtteranceRecord

AFFINITY_SOURCES = ("posterior-kl", "bottleneck-dist", "speaker-dist")


class AttentionError(ValueError):
    """Invalid input to attention computation."""


@dataclass(frozen=True)
class AffinityConfig:
    """Affinity source and numeric floors for the attention weights."""

    source: str = "posterior-kl"
    kl_floor: float = 1e-6
    dist_floor: float = 1e-6
    posterior_floor: float = 1e-10

    def __post_init__(self):
        if self.source not in AFFINITY_SOURCES:
            raise AttentionError(f"unknown affinity source {self.source!r}")
        if min(self.kl_floor, self.dist_floor, self.posterior_floor) <= 0:
            raise AttentionError("all floors must be positive")


@dataclass(frozen=True)
class AttentionMatrix:
    """Row-stochastic weight matrix; row t = test frame, column i = enrollment frame."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise AttentionError("attention weights must be a 2-D matrix")
        if np.any(w < 0):
            raise AttentionError("attention weights must be nonnegative")
        if np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-9:
            raise AttentionError("attention rows must sum to 1")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape


def _floor_normalize(p: np.ndarray, floor: float) -> np.ndarray:
    """Clamp entries at floor and renormalize rows to sum to 1."""
    q = np.maximum(p, floor)
    return q / q.sum(axis=-1, keepdims=True)


def kl_divergence(p, q, posterior_floor: float = 1e-10) -> float:
    """KL(p || q) with both distributions floored and renormalized first."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise AttentionError(f"distribution length mismatch: {p.shape} vs {q.shape}")
    p = _floor_normalize(p, posterior_floor)
    q = _floor_normalize(q, posterior_floor)
    return float(np.sum(p * (np.log(p) - np.log(q))))


def _kl_matrix(p_test: np.ndarray, p_enroll: np.ndarray, floor: float) -> np.ndarray:
    """Pairwise KL(test row || enroll row); shape T' x T."""
    pt = _floor_normalize(p_test, floor)
    pe = _floor_normalize(p_enroll, floor)
    self_term = np.sum(pt * np.log(pt), axis=1)
    cross = pt @ np.log(pe).T
    return np.maximum(self_term[:, None] - cross, 0.0)


def attention_row_from_kl(p_test, p_enroll: FeatureMatrix | np.ndarray,
                          cfg: AffinityConfig) -> np.ndarray:
    """Weight row over enrollment frames from reciprocal KL distance."""
    pe = p_enroll.data if isinstance(p_enroll, FeatureMatrix) else np.asarray(p_enroll)
    pt = np.atleast_2d(np.asarray(p_test, dtype=np.float64))
    if pt.shape[1] != pe.shape[1]:
        raise AttentionError(f"posterior dimension mismatch: {pt.shape[1]} vs {pe.shape[1]}")
    kl = _kl_matrix(pt, pe, cfg.posterior_floor)[0]
    w = 1.0 / np.maximum(kl, cfg.kl_floor)
    return w / w.sum()


def attention_row_from_distance(x_test, x_enroll: FeatureMatrix | np.ndarray,
                                cfg: AffinityConfig) -> np.ndarray:
    """Weight row over enrollment frames from reciprocal squared Euclidean distance."""
    xe = x_enroll.data if isinstance(x_enroll, FeatureMatrix) else np.asarray(x_enroll)
    xt = np.atleast_2d(np.asarray(x_test, dtype=np.float64))
    if xt.shape[1] != xe.shape[1]:
        raise AttentionError(f"feature dimension mismatch: {xt.shape[1]} vs {xe.shape[1]}")
    d2 = cdist(xt, xe, metric="sqeuclidean")[0]
    w = 1.0 / np.maximum(d2, cfg.dist_floor)
    return w / w.sum()


def _attention_weights(test_feats: np.ndarray, enroll_feats: np.ndarray,
                       cfg: AffinityConfig) -> np.ndarray:
    if test_feats.shape[1] != enroll_feats.shape[1]:
        raise AttentionError(
            f"feature dimension mismatch: {test_feats.shape[1]} vs {enroll_feats.shape[1]}")
    if cfg.source == "posterior-kl":
        kl = _kl_matrix(test_feats, enroll_feats, cfg.posterior_floor)
        w = 1.0 / np.maximum(kl, cfg.kl_floor)
    else:
        d2 = cdist(test_feats, enroll_feats, metric="sqeuclidean")
        w = 1.0 / np.maximum(d2, cfg.dist_floor)
    return w / w.sum(axis=1, keepdims=True)


def mean_row_entropy(alpha: AttentionMatrix) -> float:
    """Average entropy of the attention rows; lower means more concentrated."""
    w = np.maximum(alpha.weights, 1e-300)
    return float(-(w * np.log(w)).sum(axis=1).mean())


def attention_features(rec: UtteranceRecord, cfg: AffinityConfig) -> FeatureMatrix:
    """Pick the feature matrix the affinity source operates on."""
    if cfg.source == "speaker-dist":
        return rec.speaker_feats
    if rec.phonetic_feats is None:
        raise AttentionError(f"utterance {rec.utt_id}: affinity source {cfg.source!r} "
                             f"requires phonetic features")
    required = "posterior" if cfg.source == "posterior-kl" else "bottleneck"
    if rec.phonetic_feats.kind != required:
        raise AttentionError(
            f"utterance {rec.utt_id}: affinity source {cfg.source!r} requires "
            f"{required} features, got {rec.phonetic_feats.kind}")
    return rec.phonetic_feats


def build_attention(test_feats: FeatureMatrix | np.ndarray,
                    enroll_feats: FeatureMatrix | np.ndarray,
                    cfg: AffinityConfig) -> AttentionMatrix:
    """Assemble the full T' x T attention matrix for one test/enrollment pair."""
    tf = test_feats.data if isinstance(test_feats, FeatureMatrix) else np.asarray(test_feats)
    ef = enroll_feats.data if isinstance(enroll_feats, FeatureMatrix) else np.asarray(enroll_feats)
    return AttentionMatrix(_attention_weights(tf, ef, cfg))
