"""Feature matrices, utterance records and manifests, plus their on-disk text formats.

Matrix file format: line 1 is ``<T> <D>``, followed by T lines of D
space-separated decimal floats (UTF-8, LF).  Manifest format: one utterance per
line, tab-separated ``utt_id<TAB>speaker_id<TAB>speaker_path[<TAB>phonetic_path]``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

FEATURE_KINDS = ("speaker", "posterior", "bottleneck")

# Posterior rows whose sum deviates from 1 by more than this are rejected;
# smaller deviations are renormalized away on load.
POSTERIOR_SUM_TOL = 1e-4


class FeatureError(ValueError):
    """Malformed or invalid feature data."""


class ManifestError(ValueError):
    """Malformed or inconsistent manifest."""


@dataclass(frozen=True)
class FeatureMatrix:
    """A T x D frame-level feature matrix of a given kind."""

    data: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise FeatureError(f"unknown feature kind {self.kind!r}")
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise FeatureError(f"feature matrix must be T x D with T,D >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise FeatureError("feature matrix contains NaN or Inf")
        if self.kind == "posterior":
            if np.any(arr < 0):
                raise FeatureError("posterior matrix has negative entries")
            sums = arr.sum(axis=1)
            bad = np.abs(sums - 1.0) > POSTERIOR_SUM_TOL
            if np.any(bad):
                row = int(np.argmax(bad))
                raise FeatureError(
                    f"posterior row {row} sums to {sums[row]:.6g}, "
                    f"outside 1 +/- {POSTERIOR_SUM_TOL}"
                )
            arr = arr / sums[:, None]
        if self.kind == "speaker":
            norms = np.linalg.norm(arr, axis=1)
            if np.any(norms == 0.0):
                row = int(np.argmax(norms == 0.0))
                raise FeatureError(f"speaker frame {row} has zero norm")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class UtteranceRecord:
    """One utterance: speaker features plus optional frame-synchronous phonetic features."""

    utt_id: str
    speaker_id: str
    speaker_feats: FeatureMatrix
    phonetic_feats: FeatureMatrix | None = None

    def __post_init__(self):
        if self.speaker_feats.kind != "speaker":
            raise FeatureError(f"utterance {self.utt_id}: speaker_feats has kind "
                               f"{self.speaker_feats.kind!r}")
        if self.phonetic_feats is not None:
            if self.phonetic_feats.kind not in ("posterior", "bottleneck"):
                raise FeatureError(f"utterance {self.utt_id}: phonetic_feats has kind "
                                   f"{self.phonetic_feats.kind!r}")
            if self.phonetic_feats.rows != self.speaker_feats.rows:
                raise FeatureError(
                    f"utterance {self.utt_id}: speaker features have "
                    f"{self.speaker_feats.rows} frames but phonetic features have "
                    f"{self.phonetic_feats.rows}"
                )


@dataclass
class Manifest:
    """An indexed collection of utterance records with unique ids."""

    utterances: list[UtteranceRecord]
    _index: dict[str, UtteranceRecord] = field(init=False, repr=False)

    def __post_init__(self):
        self._index = {}
        for rec in self.utterances:
            if rec.utt_id in self._index:
                raise ManifestError(f"duplicate utt_id {rec.utt_id!r}")
            self._index[rec.utt_id] = rec

    def __len__(self) -> int:
        return len(self.utterances)

    def __contains__(self, utt_id: str) -> bool:
        return utt_id in self._index

    def get(self, utt_id: str) -> UtteranceRecord:
        try:
            return self._index[utt_id]
        except KeyError:
            raise ManifestError(f"unknown utt_id {utt_id!r}") from None

    def speaker_ids(self) -> list[str]:
        seen = dict.fromkeys(rec.speaker_id for rec in self.utterances)
        return list(seen)


def load_feature_matrix(path: str | os.PathLike, kind: str) -> FeatureMatrix:
    """Load and validate a feature matrix from the plain-text format."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise FeatureError(f"{path}: header must be '<T> <D>', got {header!r}")
        try:
            n_rows, n_cols = int(header[0]), int(header[1])
        except ValueError:
            raise FeatureError(f"{path}: non-integer header {header!r}") from None
        rows = []
        for lineno, line in enumerate(f, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != n_cols:
                raise FeatureError(f"{path}:{lineno}: expected {n_cols} values, got {len(parts)}")
            try:
                rows.append([float(x) for x in parts])
            except ValueError:
                raise FeatureError(f"{path}:{lineno}: non-numeric value") from None
    if len(rows) != n_rows:
        raise FeatureError(f"{path}: header promises {n_rows} rows, file has {len(rows)}")
    try:
        return FeatureMatrix(np.array(rows, dtype=np.float64), kind)
    except FeatureError as e:
        raise FeatureError(f"{path}: {e}") from None


def save_feature_matrix(m: FeatureMatrix, path: str | os.PathLike) -> None:
    """Write a feature matrix; load_feature_matrix round-trips within 1e-12."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{m.rows} {m.cols}\n")
        for row in m.data:
            # 17 significant digits round-trip float64 exactly
            f.write(" ".join(format(v, ".17g") for v in row) + "\n")


def load_manifest(path: str | os.PathLike, phonetic_kind: str = "posterior") -> Manifest:
    """Load a manifest and every feature file it references.

    Relative feature paths are resolved against the manifest's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    records = []
    seen: set[str] = set()
    try:
        f = open(path, "r", encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"cannot open manifest {path}: {e}") from None
    with f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) not in (3, 4):
                raise ManifestError(f"{path}:{lineno}: expected 3 or 4 tab-separated fields, "
                                    f"got {len(fields)}")
            utt_id, speaker_id, spk_path = fields[0], fields[1], fields[2]
            if utt_id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate utt_id {utt_id!r}")
            seen.add(utt_id)
            spk = load_feature_matrix(_resolve(base, spk_path), "speaker")
            phon = None
            if len(fields) == 4 and fields[3]:
                phon = load_feature_matrix(_resolve(base, fields[3]), phonetic_kind)
            try:
                records.append(UtteranceRecord(utt_id, speaker_id, spk, phon))
            except FeatureError as e:
                raise ManifestError(f"{path}:{lineno}: {e}") from None
    return Manifest(records)


def save_manifest(manifest_path: str | os.PathLike, entries: list[tuple]) -> None:
    """Write manifest lines from (utt_id, speaker_id, spk_path[, phon_path]) tuples."""
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as f:
        for entry in entries:
            f.write("\t".join(entry) + "\n")


def _resolve(base: str, p: str) -> str:
    return p if os.path.isabs(p) else os.path.join(base, p)
