"""Command-line entry point.

Subcommands: score, eval, align, lda-train, synth.  Exit codes: 0 success,
1 runtime/data error, 2 usage or configuration error.  Set ATTNSCORE_LOG to
control log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from attnscore.attention import AffinityConfig, build_attention
from attnscore.evaluation import (
    EvalError,
    compute_eer,
    parse_trials,
    run_eval,
    score_trials,
    write_results_csv,
)
from attnscore.features import load_manifest
from attnscore.lda import FisherLda, LdaError, load_lda, save_lda
from attnscore.scoring import SYSTEM_SOURCE, ScoringConfig, pool_average
from attnscore.synth import SynthConfig, SynthError, export_alignment_heatmap, generate_corpus, write_corpus

log = logging.getLogger("attnscore")


class UsageError(Exception):
    """Bad flag combination or configuration; maps to exit code 2."""


def _phonetic_kind(source_or_system: str) -> str:
    return "bottleneck" if source_or_system in ("att-bn", "bottleneck-dist") else "posterior"


def _scoring_config(args) -> ScoringConfig:
    lda = None
    if args.metric == "lda-cosine":
        if not args.lda:
            raise UsageError("metric 'lda-cosine' requires --lda")
        lda = load_lda(args.lda)
    affinity = None
    if args.system != "baseline":
        affinity = AffinityConfig(
            source=SYSTEM_SOURCE[args.system],
            kl_floor=args.kl_floor,
            dist_floor=args.dist_floor,
            posterior_floor=args.posterior_floor,
        )
    return ScoringConfig(system=args.system, metric=args.metric,
                         symmetrize=args.symmetrize, affinity=affinity, lda=lda)


def cmd_score(args) -> int:
    cfg = _scoring_config(args)
    manifest = load_manifest(args.manifest, phonetic_kind=_phonetic_kind(args.system))
    trials = parse_trials(args.trials)
    scores = score_trials(trials, manifest, cfg, workers=args.workers)
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write("trial_index,score,label\n")
        for i, (s, t) in enumerate(zip(scores, trials)):
            f.write(f"{i},{s:.6g},{t.label}\n")
    log.info("wrote %d trial scores to %s", len(scores), args.out)
    return 0


def cmd_eval(args) -> int:
    if args.scores:
        target, nontarget = [], []
        with open(args.scores, "r", encoding="utf-8") as f:
            header = f.readline()
            if not header.startswith("trial_index"):
                raise EvalError(f"{args.scores}: expected scores CSV header")
            for line in f:
                if not line.strip():
                    continue
                _, score, label = line.strip().split(",")
                (target if label == "target" else nontarget).append(float(score))
        result = compute_eer(target, nontarget)
        system, metric = "precomputed", "precomputed"
    else:
        if not (args.manifest and args.trials):
            raise UsageError("eval needs either --scores or --manifest and --trials")
        cfg = _scoring_config(args)
        manifest = load_manifest(args.manifest, phonetic_kind=_phonetic_kind(args.system))
        trials = parse_trials(args.trials)
        result = run_eval(trials, manifest, cfg, workers=args.workers)
        system, metric = args.system, args.metric
    print(f"EER: {100.0 * result.eer:.2f}")
    if args.out:
        write_results_csv({(system, metric, args.task): result}, args.out)
    return 0


def cmd_align(args) -> int:
    manifest = load_manifest(args.manifest, phonetic_kind=_phonetic_kind(args.source))
    enroll_ids = [u for u in args.enroll.split(",") if u]
    if not enroll_ids:
        raise UsageError("--enroll must name at least one utterance")
    cfg = AffinityConfig(source=args.source, kl_floor=args.kl_floor,
                         dist_floor=args.dist_floor, posterior_floor=args.posterior_floor)
    from attnscore.attention import attention_features

    enroll_feats = np.concatenate(
        [attention_features(manifest.get(u), cfg).data for u in enroll_ids], axis=0)
    test_feats = attention_features(manifest.get(args.test), cfg).data
    alpha = build_attention(test_feats, enroll_feats, cfg)
    export_alignment_heatmap(alpha, args.out)
    log.info("wrote %s.csv and %s.pgm", args.out, args.out)
    return 0


def cmd_lda_train(args) -> int:
    manifest = load_manifest(args.manifest)
    vectors = np.array([pool_average(rec.speaker_feats) for rec in manifest.utterances])
    labels = np.array([rec.speaker_id for rec in manifest.utterances])
    lda = FisherLda(n_components=args.out_dim).fit(vectors, labels)
    save_lda(lda, args.out)
    log.info("trained %d x %d LDA transform on %d utterances",
             lda.out_dim, lda.in_dim, len(vectors))
    return 0


def cmd_synth(args) -> int:
    try:
        cfg = SynthConfig(
            n_speakers=args.n_speakers,
            utts_per_speaker=args.utts_per_speaker,
            frames_per_utt=args.frames_per_utt,
            n_phones=args.n_phones,
            speaker_dim=args.speaker_dim,
            speaker_scale=args.speaker_scale,
            phone_scale=args.phone_scale,
            noise_scale=args.noise_scale,
            task=args.task,
            posterior_sharpness=args.posterior_sharpness,
            seed=args.seed,
            n_enroll=args.n_enroll,
            phone_speaker_mix=args.phone_speaker_mix,
        )
    except SynthError as e:
        raise UsageError(str(e)) from None
    corpus = generate_corpus(cfg)
    write_corpus(corpus, args.out_dir)
    n_target = sum(t.label == "target" for t in corpus.trials)
    print(f"task: {cfg.task}")
    print(f"speakers: {cfg.n_speakers}  utterances: {len(corpus.manifest)}")
    print(f"trials: {len(corpus.trials)} ({n_target} target, "
          f"{len(corpus.trials) - n_target} nontarget)")
    return 0


def _add_scoring_flags(p):
    p.add_argument("--system", choices=["baseline", "att-spk", "att-post", "att-bn"],
                   default="baseline")
    p.add_argument("--metric", choices=["cosine", "lda-cosine"], default="cosine")
    p.add_argument("--lda", help="path to a trained LDA transform file")
    p.add_argument("--symmetrize", action="store_true",
                   help="average both scoring directions")
    _add_floor_flags(p)


def _add_floor_flags(p):
    p.add_argument("--kl-floor", type=float, default=1e-6)
    p.add_argument("--dist-floor", type=float, default=1e-6)
    p.add_argument("--posterior-floor", type=float, default=1e-10)


def build_parser() -> tuple[argparse.ArgumentParser, list]:
    parser = argparse.ArgumentParser(prog="attnscore", description=__doc__)
    parser.add_argument("--workers", type=int, default=1,
                        help="worker threads for trial scoring")
    parser.add_argument("--config", help="JSON file of flag defaults; flags override")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = []

    p = sub.add_parser("score", help="score a trial list, write per-trial CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--out", required=True)
    _add_scoring_flags(p)
    p.set_defaults(func=cmd_score)
    subparsers.append(p)

    p = sub.add_parser("eval", help="compute EER from scores or by scoring trials")
    p.add_argument("--scores", help="scores CSV from the score command")
    p.add_argument("--manifest")
    p.add_argument("--trials")
    p.add_argument("--out", help="results CSV path")
    p.add_argument("--task", default="task", help="task name for the results CSV")
    _add_scoring_flags(p)
    p.set_defaults(func=cmd_eval)
    subparsers.append(p)

    p = sub.add_parser("align", help="export an attention alignment heatmap")
    p.add_argument("--manifest", required=True)
    p.add_argument("--enroll", required=True, help="comma-separated enrollment utt ids")
    p.add_argument("--test", required=True)
    p.add_argument("--source", choices=["posterior-kl", "bottleneck-dist", "speaker-dist"],
                   default="posterior-kl")
    p.add_argument("--out", required=True, help="output prefix (.csv and .pgm appended)")
    _add_floor_flags(p)
    p.set_defaults(func=cmd_align)
    subparsers.append(p)

    p = sub.add_parser("lda-train", help="train an LDA transform on utterance d-vectors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dim", type=int, default=150)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lda_train)
    subparsers.append(p)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--task", choices=["TD", "TP", "TI"], default="TI")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-speakers", type=int, default=12)
    p.add_argument("--utts-per-speaker", type=int, default=8)
    p.add_argument("--frames-per-utt", type=int, default=15)
    p.add_argument("--n-phones", type=int, default=12)
    p.add_argument("--speaker-dim", type=int, default=16)
    p.add_argument("--speaker-scale", type=float, default=1.0)
    p.add_argument("--phone-scale", type=float, default=1.0)
    p.add_argument("--noise-scale", type=float, default=0.3)
    p.add_argument("--posterior-sharpness", type=float, default=5.0)
    p.add_argument("--n-enroll", type=int, default=3)
    p.add_argument("--phone-speaker-mix", type=float, default=0.7)
    p.set_defaults(func=cmd_synth)
    subparsers.append(p)
    return parser, subparsers


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("ATTNSCORE_LOG", "WARNING"))
    parser, subparsers = build_parser()
    try:
        args = _parse_with_config(parser, subparsers, argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def _parse_with_config(parser, subparsers, argv):
    """Apply --config JSON values as defaults, then parse; explicit flags win."""
    pre, _ = parser.parse_known_args(argv)
    if getattr(pre, "config", None):
        try:
            with open(pre.config, "r", encoding="utf-8") as f:
                defaults = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            parser.error(f"bad config file {pre.config}: {e}")
        defaults = {k.replace("-", "_"): v for k, v in defaults.items()}
        parser.set_defaults(**defaults)
        for sp in subparsers:
            sp.set_defaults(**defaults)
    return parser.parse_args(argv)


if __name__ == "__main__":
    sys.exit(main())
