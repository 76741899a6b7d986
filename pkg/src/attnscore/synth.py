"""Seeded synthetic corpora with controllable phonetic variation.

Each frame's speaker feature mixes a per-speaker latent, a per-speaker
per-phone interaction latent, a per-phone offset, and noise; phone posteriors
are softmaxed noisy one-hots.  The interaction term makes same-phone frame
pairs carry more speaker evidence than cross-phone pairs, so aligning frames
by phonetic content genuinely helps the score.

Task modes control how phone sequences are shared: TD expands one global
phone string with random per-utterance phone durations, TP uses cyclic shifts
of one shared repetition-free sequence (shift recorded as ground truth), and
TI draws an independent sequence per utterance.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from attnscore.attention import AttentionMatrix
from attnscore.evaluation import Trial, save_trials
from attnscore.features import (
    FeatureMatrix,
    Manifest,
    UtteranceRecord,
    save_feature_matrix,
    save_manifest,
)

TASKS = ("TD", "TP", "TI")


class SynthError(ValueError):
    """Invalid synthetic corpus configuration."""


@dataclass(frozen=True)
class SynthConfig:
    n_speakers: int = 16
    utts_per_speaker: int = 8
    frames_per_utt: int = 10
    n_phones: int = 6
    speaker_dim: int = 16
    speaker_scale: float = 1.0
    phone_scale: float = 1.0
    noise_scale: float = 0.8
    task: str = "TI"
    posterior_sharpness: float = 5.0
    seed: int = 0
    n_enroll: int = 3
    phone_speaker_mix: float = 0.7

    def __post_init__(self):
        if self.task not in TASKS:
            raise SynthError(f"unknown task {self.task!r}")
        if self.n_phones < 2:
            raise SynthError("n_phones must be >= 2")
        if min(self.n_speakers, self.frames_per_utt, self.speaker_dim) < 1:
            raise SynthError("counts and dimensions must be >= 1")
        if self.n_speakers < 2:
            raise SynthError("need at least 2 speakers for nontarget trials")
        if not 1 <= self.n_enroll < self.utts_per_speaker:
            raise SynthError("need 1 <= n_enroll < utts_per_speaker")
        if min(self.speaker_scale, self.phone_scale, self.noise_scale) < 0:
            raise SynthError("scales must be nonnegative")
        if self.posterior_sharpness <= 0:
            raise SynthError("posterior_sharpness must be positive")
        if not 0.0 <= self.phone_speaker_mix <= 1.0:
            raise SynthError("phone_speaker_mix must be in [0, 1]")
        if self.task == "TP" and self.frames_per_utt > self.n_phones:
            raise SynthError("TP task requires frames_per_utt <= n_phones "
                             "(phones within an utterance must be distinct)")


@dataclass
class SynthCorpus:
    manifest: Manifest
    trials: list[Trial]
    phone_ids: dict[str, np.ndarray]  # per-utterance true phone per frame
    shifts: dict[str, int] = field(default_factory=dict)  # TP cyclic shifts


def _unit_scale_rows(x: np.ndarray) -> np.ndarray:
    """Scale rows to a common norm of sqrt(D), keeping unit per-coordinate variance."""
    return np.sqrt(x.shape[-1]) * x / np.linalg.norm(x, axis=-1, keepdims=True)


def _expand_durations(rng, base: np.ndarray, frames: int) -> np.ndarray:
    """Repeat each phone of a base string with random durations summing to frames."""
    extra = rng.multinomial(frames - len(base), np.full(len(base), 1.0 / len(base)))
    return np.repeat(base, 1 + extra)


def generate_corpus(cfg: SynthConfig) -> SynthCorpus:
    """Deterministically generate a corpus from the config (seed included)."""
    rng = np.random.default_rng(cfg.seed)
    z_speaker = _unit_scale_rows(rng.standard_normal((cfg.n_speakers, cfg.speaker_dim)))
    m_phone = _unit_scale_rows(rng.standard_normal((cfg.n_phones, cfg.speaker_dim)))
    # per-(speaker, phone) interaction: same-phone frame pairs share more
    # speaker evidence than cross-phone pairs
    w_interact = rng.standard_normal((cfg.n_speakers, cfg.n_phones, cfg.speaker_dim))
    mix = cfg.phone_speaker_mix

    if cfg.task == "TD":
        base_seq = rng.integers(0, cfg.n_phones, max(2, cfg.frames_per_utt // 2))
    elif cfg.task == "TP":
        base_seq = rng.permutation(cfg.n_phones)[: cfg.frames_per_utt]
    else:
        base_seq = None

    records = []
    phone_ids: dict[str, np.ndarray] = {}
    shifts: dict[str, int] = {}
    for sp in range(cfg.n_speakers):
        speaker_id = f"spk{sp:03d}"
        for u in range(cfg.utts_per_speaker):
            utt_id = f"{speaker_id}_utt{u:02d}"
            if cfg.task == "TD":
                seq = _expand_durations(rng, base_seq, cfg.frames_per_utt)
            elif cfg.task == "TP":
                shift = int(rng.integers(0, cfg.frames_per_utt))
                seq = base_seq[(np.arange(cfg.frames_per_utt) + shift) % cfg.frames_per_utt]
                shifts[utt_id] = shift
            else:
                seq = rng.integers(0, cfg.n_phones, cfg.frames_per_utt)
            noise = rng.standard_normal((cfg.frames_per_utt, cfg.speaker_dim))
            speaker_part = (np.sqrt(1.0 - mix) * z_speaker[sp]
                            + np.sqrt(mix) * w_interact[sp][seq])
            spk = (cfg.speaker_scale * speaker_part
                   + cfg.phone_scale * m_phone[seq]
                   + cfg.noise_scale * noise)
            logits = (cfg.posterior_sharpness * np.eye(cfg.n_phones)[seq]
                      + rng.standard_normal((cfg.frames_per_utt, cfg.n_phones)))
            post = softmax(logits, axis=1)
            records.append(UtteranceRecord(
                utt_id, speaker_id,
                FeatureMatrix(spk, "speaker"),
                FeatureMatrix(post, "posterior"),
            ))
            phone_ids[utt_id] = np.asarray(seq).copy()

    trials = _make_trials(cfg)
    return SynthCorpus(Manifest(records), trials, phone_ids, shifts)


def _make_trials(cfg: SynthConfig) -> list[Trial]:
    """First n_enroll utterances per speaker enroll; the rest test against everyone."""
    trials = []
    enroll = {sp: tuple(f"spk{sp:03d}_utt{u:02d}" for u in range(cfg.n_enroll))
              for sp in range(cfg.n_speakers)}
    for model in range(cfg.n_speakers):
        for sp in range(cfg.n_speakers):
            label = "target" if sp == model else "nontarget"
            for u in range(cfg.n_enroll, cfg.utts_per_speaker):
                trials.append(Trial(enroll[model], f"spk{sp:03d}_utt{u:02d}", label))
    return trials


def write_corpus(corpus: SynthCorpus, out_dir: str | os.PathLike) -> None:
    """Write manifest, feature files, trial list, and ground-truth phones."""
    out_dir = os.fspath(out_dir)
    feats_dir = os.path.join(out_dir, "feats")
    os.makedirs(feats_dir, exist_ok=True)
    entries = []
    for rec in corpus.manifest.utterances:
        spk_path = os.path.join("feats", f"{rec.utt_id}.spk.txt")
        save_feature_matrix(rec.speaker_feats, os.path.join(out_dir, spk_path))
        entry = [rec.utt_id, rec.speaker_id, spk_path]
        if rec.phonetic_feats is not None:
            phon_path = os.path.join("feats", f"{rec.utt_id}.post.txt")
            save_feature_matrix(rec.phonetic_feats, os.path.join(out_dir, phon_path))
            entry.append(phon_path)
        entries.append(tuple(entry))
    save_manifest(os.path.join(out_dir, "manifest.tsv"), entries)
    save_trials(corpus.trials, os.path.join(out_dir, "trials.tsv"))
    with open(os.path.join(out_dir, "phones.tsv"), "w", encoding="utf-8", newline="\n") as f:
        for rec in corpus.manifest.utterances:
            seq = " ".join(str(int(p)) for p in corpus.phone_ids[rec.utt_id])
            shift = corpus.shifts.get(rec.utt_id, "")
            f.write(f"{rec.utt_id}\t{seq}\t{shift}\n")


def export_alignment_heatmap(alpha: AttentionMatrix, prefix: str | os.PathLike) -> None:
    """Write attention weights as <prefix>.csv and a P2 graymap <prefix>.pgm.

    Pixel intensity is the weight scaled so each row's maximum maps to white.
    """
    prefix = os.fspath(prefix)
    w = alpha.weights
    with open(prefix + ".csv", "w", encoding="utf-8", newline="\n") as f:
        for row in w:
            f.write(",".join(format(v, ".17g") for v in row) + "\n")
    row_max = w.max(axis=1, keepdims=True)
    pixels = np.rint(255.0 * w / row_max).astype(int)
    n_rows, n_cols = w.shape
    with open(prefix + ".pgm", "w", encoding="utf-8", newline="\n") as f:
        f.write(f"P2\n{n_cols} {n_rows}\n255\n")
        for row in pixels:
            f.write(" ".join(str(v) for v in row) + "\n")
