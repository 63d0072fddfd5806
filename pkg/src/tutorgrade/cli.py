"""Command line for the full pipeline and its individual stages.

Subcommands map one-to-one onto pipeline stages (clean, split, train,
predict, ensemble, evaluate, analyze) plus `pipeline` to run everything
and `synth` to generate the bundled synthetic corpora. All outputs land
under a single workdir; `pipeline` finishes by writing a manifest with a
content hash for every artifact, so two runs with the same config and seed
are byte-comparable.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

from tutorgrade import analysis as analysis_mod
from tutorgrade.artifacts import atomic_path, write_manifest
from tutorgrade.backends import backend_from_ref, get_backend
from tutorgrade.classify import (
    Checkpoint,
    PredictionRow,
    PredictionSet,
    TrainConfig,
    corpus_model_inputs,
    predict_with_confidence,
    train_fold,
)
from tutorgrade.corpus import Corpus, Label, label_distribution, load_corpus, save_corpus
from tutorgrade.ensemble import EnsembleResult, compare_to_members, hard_vote
from tutorgrade.folds import FoldPlan, grouped_kfold, verify_no_leakage
from tutorgrade.metrics import aggregate_cv, compute_report
from tutorgrade.preprocess import CleaningConfig, clean_corpus
from tutorgrade.weights import parse_weights_arg
from tutorgrade import synthetic

# Linear-head training over normalized hashed features needs a far hotter
# learning rate than transformer fine-tuning; resolve the default per backend.
DEFAULT_SEED = 42
BACKEND_DEFAULT_LR = {"hashed": 3.0}
FALLBACK_LR = 2e-5


@dataclass
class RunConfig:
    """Pipeline settings; every field can come from --config, flags win."""

    corpus: str = ""
    workdir: str = ""
    track: str = "mistake_identification"
    test_corpus: str | None = None
    cleaning_config: str | None = None
    k: int = 5
    seed: int = DEFAULT_SEED
    backend: str = "hashed"
    dim: int = 256
    learning_rate: float | None = None  # None: per-backend default
    batch_size: int = 32
    max_epochs: int = 20
    patience: int = 2
    schedule: str = "linear_decay"
    weights: str = "manual"
    truncation: int | None = None  # None: cleaning config's train_truncation
    jobs: int = 1

    def resolved_lr(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return BACKEND_DEFAULT_LR.get(self.backend, FALLBACK_LR)

    def echo(self) -> dict:
        # The workdir is where the manifest lives; leaving it out keeps
        # manifests comparable across runs in different directories.
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.pop("workdir")
        data["learning_rate"] = self.resolved_lr()
        return data


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _write_csv_rows(path: Path, rows) -> None:
    with atomic_path(path) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)


def _write_json(path: Path, data: dict) -> None:
    with atomic_path(path) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _load_cleaning_config(path: str | None) -> CleaningConfig:
    return CleaningConfig.from_file(path) if path else CleaningConfig()


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    if args.kind == "desk":
        corpus = synthetic.make_desk_corpus(
            args.dialogues, args.responses, args.seed, args.track
        )
    elif args.kind == "separable":
        corpus = synthetic.make_separable_corpus(
            args.dialogues, args.responses, args.seed, args.track
        )
    else:
        corpus, config = synthetic.make_cleanup_corpus(track=args.track)
        if args.cleaning_config_out:
            with atomic_path(Path(args.cleaning_config_out)) as tmp:
                config.to_file(tmp)
    with atomic_path(Path(args.out)) as tmp:
        save_corpus(corpus, tmp)
    print(
        f"wrote {args.kind} corpus: {len(corpus.dialogues)} dialogues, "
        f"{corpus.n_responses} responses -> {args.out}"
    )
    return 0


# ---------------------------------------------------------------------------
# clean


def cmd_clean(args) -> int:
    corpus = load_corpus(args.corpus, args.track)
    config = _load_cleaning_config(args.cleaning_config)
    cleaned, report = clean_corpus(corpus, config)
    with atomic_path(Path(args.out)) as tmp:
        save_corpus(cleaned, tmp)
    _write_csv_rows(Path(args.report), report.to_rows())
    print(f"cleaned {cleaned.n_responses} responses -> {args.out}")
    print(f"cleanup operations by source (total {report.grand_total}):")
    for source in report.sources:
        print(f"  {source:<16} {report.source_total(source)}")
    return 0


# ---------------------------------------------------------------------------
# split


def cmd_split(args) -> int:
    corpus = load_corpus(args.corpus, args.track)
    plan = grouped_kfold(corpus, args.k, args.seed)
    leakage = verify_no_leakage(plan, corpus)
    if not leakage.ok:
        raise RuntimeError(f"leakage detected in generated plan: {leakage}")
    with atomic_path(Path(args.out)) as tmp:
        plan.save(tmp)
    print(f"fold plan (k={plan.k}, seed={plan.seed}) -> {args.out}")
    print("fold  dialogues  responses")
    for f in range(plan.k):
        print(f"{f + 1:>4}  {leakage.fold_dialogues[f]:>9}  {leakage.fold_responses[f]:>9}")
    return 0


# ---------------------------------------------------------------------------
# train


def _train_config(cfg: RunConfig, corpus: Corpus, cleaning: CleaningConfig) -> TrainConfig:
    counts = label_distribution(corpus) if cfg.weights in ("balanced", "log") else None
    return TrainConfig(
        learning_rate=cfg.resolved_lr(),
        batch_size=cfg.batch_size,
        max_epochs=cfg.max_epochs,
        patience=cfg.patience,
        schedule=cfg.schedule,
        seed=cfg.seed,
        weights=parse_weights_arg(cfg.weights, counts, cfg.track),
        truncation=cfg.truncation if cfg.truncation is not None else cleaning.train_truncation,
    )


def _train_one(payload) -> Checkpoint:
    corpus, plan, fold, backend, config = payload
    return train_fold(corpus, plan, fold, backend, config)


def _train_folds(
    corpus: Corpus, plan: FoldPlan, cfg: RunConfig, config: TrainConfig, folds: list[int]
) -> list[Checkpoint]:
    backend = get_backend(cfg.backend, dim=cfg.dim, seed=cfg.seed)
    payloads = [(corpus, plan, f, backend, config) for f in folds]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            checkpoints = list(pool.map(_train_one, payloads))
    else:
        checkpoints = [_train_one(p) for p in payloads]
    return checkpoints


def _save_checkpoint(ckpt: Checkpoint, workdir: Path) -> Path:
    target = workdir / "checkpoints" / f"fold{ckpt.fold}"
    with atomic_path(target) as tmp:
        ckpt.save(tmp)
    return target


def _run_config_from_args(args, require: tuple[str, ...] = ()) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
        unknown = set(data) - {f.name for f in fields(RunConfig)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key, value in data.items():
            setattr(cfg, key, value)
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    for name in require:
        if not getattr(cfg, name):
            raise ValueError(f"missing required setting: --{name.replace('_', '-')}")
    return cfg


def cmd_train(args) -> int:
    cfg = _run_config_from_args(args, require=("corpus", "workdir"))
    corpus = load_corpus(cfg.corpus, cfg.track)
    plan = FoldPlan.load(args.folds)
    cleaning = _load_cleaning_config(cfg.cleaning_config)
    config = _train_config(cfg, corpus, cleaning)
    folds = [args.fold] if args.fold is not None else list(range(plan.k))
    workdir = Path(cfg.workdir)
    checkpoints = _train_folds(corpus, plan, cfg, config, folds)
    for ckpt in checkpoints:
        _save_checkpoint(ckpt, workdir)
        print(
            f"fold {ckpt.fold + 1}: best val macro-F1 {ckpt.best_val_macro_f1:.4f} "
            f"at epoch {ckpt.epoch}"
        )
    return 0


# ---------------------------------------------------------------------------
# predict


def _val_corpus(corpus: Corpus, plan: FoldPlan, fold: int) -> Corpus:
    dialogues = [d for d in corpus.dialogues if plan.assignment[d.dialogue_id] == fold]
    return Corpus(dialogues, corpus.track)


def _predict_corpus(
    ckpt: Checkpoint, corpus: Corpus, truncation: int
) -> PredictionSet:
    backend = backend_from_ref(ckpt.backend_ref)
    ids, inputs = corpus_model_inputs(corpus, backend.token_count, truncation)
    return predict_with_confidence(ckpt, backend, inputs, ids)


def cmd_predict(args) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    corpus = load_corpus(args.corpus, args.track)
    if args.val_only:
        if not args.folds:
            return _fail("--val-only needs --folds to locate the validation split")
        plan = FoldPlan.load(args.folds)
        corpus = _val_corpus(corpus, plan, ckpt.fold)
    predictions = _predict_corpus(ckpt, corpus, args.truncation)
    with atomic_path(Path(args.out)) as tmp:
        predictions.save_csv(tmp)
    print(f"predicted {len(predictions.rows)} samples with fold {ckpt.fold + 1} -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# ensemble


def cmd_ensemble(args) -> int:
    members = [PredictionSet.load_csv(p) for p in args.inputs]
    result = hard_vote(members)
    with atomic_path(Path(args.out)) as tmp:
        result.save_csv(tmp)
    ties = sum(1 for row in result.rows if row.tie_broken)
    print(f"ensembled {len(members)} models over {len(result.rows)} samples "
          f"({ties} ties broken by mean softmax) -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# evaluate


def _load_predictions_any(path: str) -> tuple[list[str], list[Label]]:
    """Accept either a model prediction CSV or an ensemble CSV."""
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline().strip().split(",")
    if "vote_no" in header:
        result = EnsembleResult.load_csv(path)
        return [r.sample_id for r in result.rows], [r.label for r in result.rows]
    predictions = PredictionSet.load_csv(path)
    return [r.sample_id for r in predictions.rows], [r.label for r in predictions.rows]


def cmd_evaluate(args) -> int:
    corpus = load_corpus(args.corpus, args.track)
    gold = {r.response_id: r.label_for(corpus.track) for r in corpus.responses()}
    ids, pred = _load_predictions_any(args.pred)
    missing = [i for i in ids if i not in gold]
    if missing:
        return _fail(f"gold labels missing for {len(missing)} samples, e.g. {missing[:3]}")
    report = compute_report([gold[i] for i in ids], pred)
    _write_json(Path(args.out), report.to_dict())
    print(f"samples: {len(ids)}")
    print(f"macro-F1: {report.macro_f1:.4f}  accuracy: {report.accuracy:.4f}")
    assert report.lenient is not None
    print(
        f"lenient macro-F1: {report.lenient.macro_f1:.4f}  "
        f"lenient accuracy: {report.lenient.accuracy:.4f}"
    )
    print(report.confusion.render())
    return 0


# ---------------------------------------------------------------------------
# analyze


def _pooled_rows(per_fold: list[PredictionSet]) -> list:
    rows = []
    for predictions in per_fold:
        rows.extend((r.sample_id, predictions.model_id, r.label, r.probs) for r in predictions.rows)
    return rows


def _write_pooled_csv(path: Path, pooled_rows) -> None:
    rows = [["sample_id", "fold", "pred", "p_no", "p_some", "p_yes"]]
    for sid, fold, label, probs in pooled_rows:
        rows.append([sid, str(fold), label.canonical()] + [repr(p) for p in probs])
    _write_csv_rows(path, rows)


def _analysis_stage(
    workdir: Path,
    corpus: Corpus,
    plan: FoldPlan,
    checkpoints: list[Checkpoint],
    val_predictions: list[PredictionSet],
    truncation: int,
) -> None:
    out = workdir / "analysis"
    out.mkdir(parents=True, exist_ok=True)
    gold = {r.response_id: r.label_for(corpus.track) for r in corpus.responses()}

    exports = []
    for ckpt in checkpoints:
        backend = backend_from_ref(ckpt.backend_ref)
        val = _val_corpus(corpus, plan, ckpt.fold)
        ids, inputs = corpus_model_inputs(val, backend.token_count, truncation)
        exports.append(
            analysis_mod.export_embeddings(
                backend, [ckpt], inputs, ids, [gold[i] for i in ids]
            )
        )
    combined = analysis_mod.EmbeddingExport(
        dim=exports[0].dim, rows=[row for e in exports for row in e.rows]
    )
    with atomic_path(out / "embeddings.csv") as tmp:
        combined.save_csv(tmp)
    projected, ratios = analysis_mod.pca_project(combined)
    with atomic_path(out / "pca.csv") as tmp:
        analysis_mod.save_projection_csv(combined, projected, tmp)
    _write_json(out / "pca_meta.json", {"explained_variance_ratio": [float(r) for r in ratios]})

    # Flatten pooled per-fold predictions into one set for confidence stats.
    pooled = _pooled_rows(val_predictions)
    pooled_set = PredictionSet(
        model_id=-1, rows=[PredictionRow(sid, label, probs) for sid, _, label, probs in pooled]
    )
    stats = analysis_mod.confidence_stats(pooled_set)
    stats.write_json(out / "confidence.json")
    with atomic_path(out / "confidence.txt") as tmp:
        tmp.write_text(stats.render() + "\n", encoding="utf-8")

    texts = {r.response_id: r.text_for_model for r in corpus.responses()}
    records = analysis_mod.error_report(
        gold=[gold[sid] for sid, _, _, _ in pooled],
        pred=[label for _, _, label, _ in pooled],
        sample_ids=[sid for sid, _, _, _ in pooled],
        texts=[texts[sid] for sid, _, _, _ in pooled],
    )
    analysis_mod.save_error_report(records, out / "errors.json")


def cmd_analyze(args) -> int:
    cfg = _run_config_from_args(args, require=("corpus", "workdir"))
    workdir = Path(cfg.workdir)
    corpus = load_corpus(cfg.corpus, cfg.track)
    plan_path = Path(args.folds) if args.folds else workdir / "folds.json"
    if not plan_path.is_file():
        return _fail(f"fold plan not found at {plan_path}; pass --folds")
    plan = FoldPlan.load(plan_path)
    cleaning = _load_cleaning_config(cfg.cleaning_config)
    truncation = cfg.truncation if cfg.truncation is not None else cleaning.train_truncation
    checkpoint_dirs = sorted((workdir / "checkpoints").glob("fold*"))
    if not checkpoint_dirs:
        return _fail(f"no checkpoints under {workdir / 'checkpoints'}")
    checkpoints = [Checkpoint.load(d) for d in checkpoint_dirs]
    val_predictions = [
        _predict_corpus(ckpt, _val_corpus(corpus, plan, ckpt.fold), truncation)
        for ckpt in checkpoints
    ]
    _analysis_stage(workdir, corpus, plan, checkpoints, val_predictions, truncation)
    print(f"analysis artifacts -> {workdir / 'analysis'}")
    return 0


# ---------------------------------------------------------------------------
# pipeline


def cmd_pipeline(args) -> int:
    cfg = _run_config_from_args(args, require=("corpus", "workdir"))
    for path in (cfg.corpus, cfg.test_corpus, cfg.cleaning_config):
        if path and not Path(path).is_file():
            return _fail(f"input path does not exist: {path}")
    workdir = Path(cfg.workdir)
    workdir.mkdir(parents=True, exist_ok=True)

    state: dict = {}

    def stage_clean():
        corpus = load_corpus(cfg.corpus, cfg.track)
        cleaning = _load_cleaning_config(cfg.cleaning_config)
        cleaned, report = clean_corpus(corpus, cleaning)
        with atomic_path(workdir / "cleaned.jsonl") as tmp:
            save_corpus(cleaned, tmp)
        _write_csv_rows(workdir / "cleaning_report.csv", report.to_rows())
        state["corpus"] = cleaned
        state["cleaning"] = cleaning
        print(f"[clean] {cleaned.n_responses} responses, {report.grand_total} cleanup operations")

    def stage_split():
        plan = grouped_kfold(state["corpus"], cfg.k, cfg.seed)
        leakage = verify_no_leakage(plan, state["corpus"])
        if not leakage.ok:
            raise RuntimeError("generated plan leaks dialogues across splits")
        with atomic_path(workdir / "folds.json") as tmp:
            plan.save(tmp)
        state["plan"] = plan
        print(f"[split] k={cfg.k}, fold responses: {leakage.fold_responses}")

    def stage_train():
        config = _train_config(cfg, state["corpus"], state["cleaning"])
        state["train_config"] = config
        checkpoints = _train_folds(
            state["corpus"], state["plan"], cfg, config, list(range(cfg.k))
        )
        for ckpt in checkpoints:
            _save_checkpoint(ckpt, workdir)
        state["checkpoints"] = checkpoints
        scores = ", ".join(f"{c.best_val_macro_f1:.3f}" for c in checkpoints)
        print(f"[train] best val macro-F1 per fold: {scores}")

    def stage_predict():
        truncation = state["train_config"].truncation
        predictions_dir = workdir / "predictions"
        val_predictions = []
        for ckpt in state["checkpoints"]:
            val = _val_corpus(state["corpus"], state["plan"], ckpt.fold)
            predictions = _predict_corpus(ckpt, val, truncation)
            with atomic_path(predictions_dir / f"fold{ckpt.fold}_val.csv") as tmp:
                predictions.save_csv(tmp)
            val_predictions.append(predictions)
        state["val_predictions"] = val_predictions
        _write_pooled_csv(predictions_dir / "pooled_val.csv", _pooled_rows(val_predictions))
        if cfg.test_corpus:
            test_corpus = load_corpus(cfg.test_corpus, cfg.track)
            cleaned_test, _ = clean_corpus(test_corpus, state["cleaning"])
            test_predictions = []
            for ckpt in state["checkpoints"]:
                predictions = _predict_corpus(ckpt, cleaned_test, truncation)
                with atomic_path(predictions_dir / f"fold{ckpt.fold}_test.csv") as tmp:
                    predictions.save_csv(tmp)
                test_predictions.append(predictions)
            state["test_corpus"] = cleaned_test
            state["test_predictions"] = test_predictions
        print(f"[predict] wrote per-fold validation predictions -> {predictions_dir}")

    def stage_ensemble():
        if not cfg.test_corpus:
            print("[ensemble] no test corpus provided; skipping")
            return
        result = hard_vote(state["test_predictions"])
        with atomic_path(workdir / "ensemble" / "test_ensemble.csv") as tmp:
            result.save_csv(tmp)
        state["test_ensemble"] = result
        ties = sum(1 for row in result.rows if row.tie_broken)
        print(f"[ensemble] {len(result.rows)} samples, {ties} ties broken")

    def stage_evaluate():
        corpus = state["corpus"]
        gold = {r.response_id: r.label_for(corpus.track) for r in corpus.responses()}
        metrics_dir = workdir / "metrics"
        metrics_dir.mkdir(parents=True, exist_ok=True)
        fold_reports = []
        pooled_gold: list[Label] = []
        pooled_pred: list[Label] = []
        for predictions in state["val_predictions"]:
            g = [gold[r.sample_id] for r in predictions.rows]
            p = [r.label for r in predictions.rows]
            report = compute_report(g, p)
            report.write_json(metrics_dir / f"fold{predictions.model_id}_val.json")
            fold_reports.append(report)
            pooled_gold.extend(g)
            pooled_pred.extend(p)
        aggregate = aggregate_cv(fold_reports, pooled=(pooled_gold, pooled_pred))
        aggregate.write_json(metrics_dir / "cv_aggregate.json")
        assert aggregate.pooled is not None
        aggregate.pooled.confusion.write_csv(metrics_dir / "pooled_confusion.csv")
        with atomic_path(metrics_dir / "pooled_confusion.txt") as tmp:
            tmp.write_text(aggregate.pooled.confusion.render() + "\n", encoding="utf-8")
        print(
            f"[evaluate] CV macro-F1 {aggregate.mean_macro_f1:.4f} "
            f"+/- {aggregate.std_macro_f1:.4f}; pooled {aggregate.pooled.macro_f1:.4f}"
        )
        if "test_ensemble" in state and state["test_corpus"].annotated:
            test_gold = {
                r.response_id: r.label_for(cfg.track)
                for r in state["test_corpus"].responses()
            }
            comparison = compare_to_members(
                state["test_ensemble"], state["test_predictions"], test_gold
            )
            comparison.ensemble_report.write_json(metrics_dir / "test_ensemble.json")
            _write_json(metrics_dir / "member_comparison.json", comparison.to_dict())
            print(
                f"[evaluate] test ensemble macro-F1 {comparison.ensemble_report.macro_f1:.4f} "
                f"(delta vs mean member {comparison.delta_vs_mean_member:+.4f})"
            )

    def stage_analyze():
        _analysis_stage(
            workdir,
            state["corpus"],
            state["plan"],
            state["checkpoints"],
            state["val_predictions"],
            state["train_config"].truncation,
        )
        print(f"[analyze] analysis artifacts -> {workdir / 'analysis'}")

    stages = [
        ("clean", stage_clean),
        ("split", stage_split),
        ("train", stage_train),
        ("predict", stage_predict),
        ("ensemble", stage_ensemble),
        ("evaluate", stage_evaluate),
        ("analyze", stage_analyze),
    ]
    for name, fn in stages:
        try:
            fn()
        except Exception as exc:
            print(f"pipeline aborted at stage '{name}': {exc}", file=sys.stderr)
            return 1

    manifest_path = write_manifest(workdir, cfg.echo())
    print(f"[manifest] {manifest_path}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_run_config_flags(parser: argparse.ArgumentParser, include=()) -> None:
    flags = {
        "corpus": dict(type=str, help="corpus JSONL file"),
        "workdir": dict(type=str, help="output directory"),
        "track": dict(type=str, choices=["mistake_identification", "mistake_location"]),
        "test_corpus": dict(type=str, help="held-out corpus for ensemble prediction"),
        "cleaning_config": dict(type=str, help="cleaning config JSON"),
        "k": dict(type=int, help="fold count"),
        "seed": dict(type=int),
        "backend": dict(type=str, help="encoder backend name"),
        "dim": dict(type=int, help="embedding dim for the built-in backend"),
        "learning_rate": dict(type=float),
        "batch_size": dict(type=int),
        "max_epochs": dict(type=int),
        "patience": dict(type=int),
        "schedule": dict(type=str, choices=["constant", "linear_decay"]),
        "weights": dict(type=str, help='"balanced", "log", "manual", or "manual:w0,w1,w2"'),
        "truncation": dict(type=int, help="training-time max tokens"),
        "jobs": dict(type=int, help="parallel fold workers"),
    }
    for name in include:
        parser.add_argument(f"--{name.replace('_', '-')}", default=None, **flags[name])
    parser.add_argument("--config", type=str, default=None, help="run config JSON; flags win")


ALL_RUN_FLAGS = (
    "corpus",
    "workdir",
    "track",
    "test_corpus",
    "cleaning_config",
    "k",
    "seed",
    "backend",
    "dim",
    "learning_rate",
    "batch_size",
    "max_epochs",
    "patience",
    "schedule",
    "weights",
    "truncation",
    "jobs",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tutorgrade",
        description="Classify tutor responses (No / To some extent / Yes) per track.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--kind", choices=["desk", "separable", "cleanup"], default="desk")
    p.add_argument("--out", required=True)
    p.add_argument("--dialogues", type=int, default=30)
    p.add_argument("--responses", type=int, default=8)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--track", default="mistake_identification")
    p.add_argument("--cleaning-config-out", default=None)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("clean", help="sanitize a corpus and write the cleanup report")
    p.add_argument("--corpus", required=True)
    p.add_argument("--track", default="mistake_identification")
    p.add_argument("--cleaning-config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(fn=cmd_clean)

    p = sub.add_parser("split", help="grouped k-fold assignment of dialogues")
    p.add_argument("--corpus", required=True)
    p.add_argument("--track", default="mistake_identification")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("train", help="train per-fold classifiers")
    _add_run_config_flags(p, include=ALL_RUN_FLAGS)
    p.add_argument("--folds", required=True, help="fold plan JSON")
    p.add_argument("--fold", type=int, default=None, help="train only this fold (0-based)")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="predict with one checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--track", default="mistake_identification")
    p.add_argument("--folds", default=None)
    p.add_argument("--val-only", action="store_true", help="restrict to the fold's val split")
    p.add_argument("--truncation", type=int, default=300)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("ensemble", help="hard-vote over prediction CSVs")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ensemble)

    p = sub.add_parser("evaluate", help="score predictions against gold labels")
    p.add_argument("--pred", required=True, help="prediction or ensemble CSV")
    p.add_argument("--corpus", required=True)
    p.add_argument("--track", default="mistake_identification")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("analyze", help="embedding, confidence, and error reports")
    _add_run_config_flags(p, include=("corpus", "workdir", "track", "cleaning_config", "truncation"))
    p.add_argument("--folds", default=None, help="fold plan JSON (default: workdir/folds.json)")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    _add_run_config_flags(p, include=ALL_RUN_FLAGS)
    p.set_defaults(fn=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        return _fail(str(exc))
    except ValueError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
