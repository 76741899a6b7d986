"""Trial lists, equal error rate computation, and result tables.

EER convention: candidate thresholds sit strictly between distinct score
values (midpoints); a score equal to or above the threshold counts as accept.
When no operating point has FAR exactly equal to FRR, the EER is linearly
interpolated between the two adjacent points where FAR - FRR changes sign.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from attnscore.features import Manifest
from attnscore.scoring import ScoringConfig, score_trial

LABELS = ("target", "nontarget")


class TrialError(ValueError):
    """Malformed trial list or unscoreable trial."""


class EvalError(ValueError):
    """Invalid evaluation input."""


@dataclass(frozen=True)
class Trial:
    enroll_ids: tuple[str, ...]
    test_id: str
    label: str

    def __post_init__(self):
        if not self.enroll_ids:
            raise TrialError("trial has no enrollment utterances")
        if self.label not in LABELS:
            raise TrialError(f"unknown label {self.label!r}")
        if self.test_id in self.enroll_ids:
            raise TrialError(f"test utterance {self.test_id!r} appears in its own "
                             f"enrollment list")


@dataclass(frozen=True)
class EvalResult:
    eer: float
    threshold_at_eer: float
    n_target: int
    n_nontarget: int
    det_points: tuple[tuple[float, float], ...]  # (FAR, FRR) at increasing thresholds


def parse_trials(path: str | os.PathLike) -> list[Trial]:
    """Parse `enroll_id[,enroll_id...]<TAB>test_id<TAB>target|nontarget` lines."""
    trials = []
    try:
        f = open(path, "r", encoding="utf-8")
    except OSError as e:
        raise TrialError(f"cannot open trial list {path}: {e}") from None
    with f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise TrialError(f"{path}:{lineno}: expected 3 tab-separated fields, "
                                 f"got {len(fields)}")
            enroll = tuple(u for u in fields[0].split(",") if u)
            try:
                trials.append(Trial(enroll, fields[1], fields[2]))
            except TrialError as e:
                raise TrialError(f"{path}:{lineno}: {e}") from None
    return trials


def save_trials(trials: list[Trial], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for t in trials:
            f.write(f"{','.join(t.enroll_ids)}\t{t.test_id}\t{t.label}\n")


def _operating_points(target: np.ndarray, nontarget: np.ndarray):
    """FAR/FRR at every midpoint between adjacent distinct scores, plus the ends."""
    distinct = np.unique(np.concatenate([target, nontarget]))
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    thresholds = np.concatenate([[distinct[0] - 1.0], mids, [distinct[-1] + 1.0]])
    far = np.array([(nontarget >= th).mean() for th in thresholds])
    frr = np.array([(target < th).mean() for th in thresholds])
    return thresholds, far, frr


def compute_eer(target_scores, nontarget_scores) -> EvalResult:
    """Equal error rate of a score set via midpoint threshold sweep."""
    target = np.asarray(target_scores, dtype=np.float64)
    nontarget = np.asarray(nontarget_scores, dtype=np.float64)
    if target.size == 0 or nontarget.size == 0:
        raise EvalError("both target and nontarget score lists must be nonempty")
    thresholds, far, frr = _operating_points(target, nontarget)
    diff = far - frr  # non-increasing in the threshold
    idx = int(np.argmax(diff <= 0))
    if diff[idx] == 0.0:
        eer, th = far[idx], thresholds[idx]
    else:
        # interpolate between the last positive-diff point and the first negative
        f0, f1 = far[idx - 1], far[idx]
        r0, r1 = frr[idx - 1], frr[idx]
        t = (r0 - f0) / ((f1 - f0) - (r1 - r0))
        eer = f0 + t * (f1 - f0)
        th = thresholds[idx - 1] + t * (thresholds[idx] - thresholds[idx - 1])
    return EvalResult(
        eer=float(eer),
        threshold_at_eer=float(th),
        n_target=int(target.size),
        n_nontarget=int(nontarget.size),
        det_points=tuple(zip(far.tolist(), frr.tolist())),
    )


def run_eval(trials: list[Trial], manifest: Manifest, cfg: ScoringConfig,
             workers: int = 1) -> EvalResult:
    """Score every trial and compute the EER; deterministic across worker counts."""
    scores = score_trials(trials, manifest, cfg, workers)
    target = [s for s, t in zip(scores, trials) if t.label == "target"]
    nontarget = [s for s, t in zip(scores, trials) if t.label == "nontarget"]
    return compute_eer(target, nontarget)


def score_trials(trials: list[Trial], manifest: Manifest, cfg: ScoringConfig,
                 workers: int = 1) -> list[float]:
    """Per-trial scores in trial-list order."""

    def one(indexed):
        i, trial = indexed
        try:
            return score_trial(trial, manifest, cfg).value
        except ValueError as e:
            raise TrialError(f"trial {i} (test {trial.test_id!r}): {e}") from None

    if workers <= 1:
        return [one(it) for it in enumerate(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, enumerate(trials)))


def render_results_table(results: dict) -> str:
    """Text table of EER percentages; keys are (system, metric, task)."""
    if not results:
        raise EvalError("no results to render")
    system_order = {"baseline": 0, "att-spk": 1, "att-post": 2, "att-bn": 3}
    metric_order = {"cosine": 0, "lda-cosine": 1}
    rows = sorted({(s, m) for s, m, _ in results},
                  key=lambda sm: (system_order.get(sm[0], 9), metric_order.get(sm[1], 9)))
    tasks = sorted({t for _, _, t in results})

    header = ["System", "Metric"] + [f"{t} EER(%)" for t in tasks]
    lines = [header]
    for s, m in rows:
        cells = [s, m]
        for t in tasks:
            r = results.get((s, m, t))
            cells.append(f"{100.0 * r.eer:.2f}" if r is not None else "-")
        lines.append(cells)
    widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
    out = []
    for row in lines:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(out) + "\n"


def write_results_csv(results: dict, path: str | os.PathLike) -> None:
    """Machine-readable results: system,metric,task,eer,n_target,n_nontarget."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("system,metric,task,eer,n_target,n_nontarget\n")
        for (s, m, t) in sorted(results):
            r = results[(s, m, t)]
            f.write(f"{s},{m},{t},{r.eer:.6g},{r.n_target},{r.n_nontarget}\n")
