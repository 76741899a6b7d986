"""Fisher linear discriminant analysis backend.

Trains on utterance-level d-vectors labeled by speaker and projects frame- or
utterance-level vectors into the discriminant subspace before cosine scoring.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError


class LdaError(ValueError):
    """Invalid LDA training data or configuration."""


class FisherLda(BaseEstimator, TransformerMixin):
    """Supervised linear projection maximizing between- over within-class scatter.

    Parameters
    ----------
    n_components : int
        Output dimensionality; must not exceed min(D, C - 1).
    ridge : float
        Relative ridge on the within-class scatter: S_w + lambda * I with
        lambda = ridge * trace(S_w) / D, guarding against singular S_w.

    Attributes
    ----------
    mean_ : (D,) global training mean.
    basis_ : (K, D) projection directions, rows sorted by descending
        generalized eigenvalue, sign fixed so each row's largest-magnitude
        component is positive.
    """

    def __init__(self, n_components: int = 150, ridge: float = 1e-4):
        self.n_components = n_components
        self.ridge = ridge

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise LdaError(f"X is {X.shape}, y has {y.shape[0]} labels")
        n, d = X.shape
        classes, counts = np.unique(y, return_counts=True)
        c = len(classes)
        if c < 2:
            raise LdaError("need at least 2 classes")
        if np.any(counts < 2):
            bad = classes[counts < 2][0]
            raise LdaError(f"class {bad!r} has fewer than 2 samples")
        k_max = min(d, c - 1)
        if not 1 <= self.n_components <= k_max:
            raise LdaError(f"n_components={self.n_components} outside [1, min(D, C-1)] = "
                           f"[1, {k_max}]")

        mean = X.mean(axis=0)
        s_w = np.zeros((d, d))
        s_b = np.zeros((d, d))
        for cls, cnt in zip(classes, counts):
            xc = X[y == cls]
            mu_c = xc.mean(axis=0)
            centered = xc - mu_c
            s_w += centered.T @ centered
            diff = mu_c - mean
            s_b += cnt * np.outer(diff, diff)
        if not s_b.any():
            raise LdaError("all class means identical; data carries no class signal")

        lam = self.ridge * np.trace(s_w) / d
        if lam == 0.0:
            lam = self.ridge
        s_w_reg = s_w + lam * np.eye(d)

        evals, evecs = scipy.linalg.eigh(s_b, s_w_reg)
        order = np.argsort(evals)[::-1][: self.n_components]
        basis = evecs[:, order].T
        # deterministic sign: largest-magnitude component of each row positive
        for row in basis:
            j = np.argmax(np.abs(row))
            if row[j] < 0:
                row *= -1
        self.mean_ = mean
        self.basis_ = basis
        self.eigenvalues_ = evals[order]
        return self

    def transform(self, X):
        if not hasattr(self, "basis_"):
            raise NotFittedError("FisherLda is not fitted")
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.basis_.shape[1]:
            raise LdaError(f"expected dimension {self.basis_.shape[1]}, got {X.shape[1]}")
        out = (X - self.mean_) @ self.basis_.T
        return out[0] if single else out

    @property
    def in_dim(self) -> int:
        return self.basis_.shape[1]

    @property
    def out_dim(self) -> int:
        return self.basis_.shape[0]


def save_lda(t: FisherLda, path: str | os.PathLike) -> None:
    """Write a fitted transform; round-trip stable within 1e-12."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{t.out_dim} {t.in_dim}\n")
        f.write(" ".join(format(v, ".17g") for v in t.mean_) + "\n")
        for row in t.basis_:
            f.write(" ".join(format(v, ".17g") for v in row) + "\n")


def load_lda(path: str | os.PathLike) -> FisherLda:
    """Load a transform written by save_lda."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise LdaError(f"{path}: malformed header {header!r}")
        k, d = int(header[0]), int(header[1])
        mean = np.array([float(x) for x in f.readline().split()])
        if mean.shape[0] != d:
            raise LdaError(f"{path}: mean has {mean.shape[0]} entries, expected {d}")
        rows = [[float(x) for x in f.readline().split()] for _ in range(k)]
    basis = np.array(rows)
    if basis.shape != (k, d):
        raise LdaError(f"{path}: basis shape {basis.shape}, expected ({k}, {d})")
    t = FisherLda(n_components=k)
    t.mean_ = mean
    t.basis_ = basis
    return t
