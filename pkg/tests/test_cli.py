import json

import pytest

from tutorgrade.classify import PredictionSet
from tutorgrade.cli import main
from tutorgrade.corpus import load_corpus
from tutorgrade.folds import FoldPlan

TRACK = "mistake_identification"


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_desk")
    corpus = root / "desk.jsonl"
    assert run("synth", "--kind", "desk", "--out", corpus, "--dialogues", 12,
               "--responses", 6, "--seed", 5) == 0
    return corpus


def test_synth_writes_loadable_corpus(desk):
    corpus = load_corpus(desk, TRACK)
    assert len(corpus.dialogues) == 12
    assert corpus.n_responses == 72
    assert corpus.annotated


def test_clean_is_deterministic_and_reports(tmp_path, desk):
    out1, rep1 = tmp_path / "c1.jsonl", tmp_path / "r1.csv"
    out2, rep2 = tmp_path / "c2.jsonl", tmp_path / "r2.csv"
    assert run("clean", "--corpus", desk, "--out", out1, "--report", rep1) == 0
    assert run("clean", "--corpus", desk, "--out", out2, "--report", rep2) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert rep1.read_bytes() == rep2.read_bytes()
    lines = rep1.read_text().strip().split("\n")
    assert len(lines) == 6  # header + 4 rule rows + totals
    assert lines[0].startswith("Category,")
    assert lines[-1].startswith("Totals,")


def test_clean_missing_config_fails(tmp_path, desk):
    code = run(
        "clean", "--corpus", desk, "--cleaning-config", tmp_path / "nope.json",
        "--out", tmp_path / "c.jsonl", "--report", tmp_path / "r.csv",
    )
    assert code != 0


def test_clean_missing_corpus_fails(tmp_path):
    code = run("clean", "--corpus", tmp_path / "ghost.jsonl",
               "--out", tmp_path / "c.jsonl", "--report", tmp_path / "r.csv")
    assert code != 0


def test_split_writes_plan(tmp_path, desk, capsys):
    plan_path = tmp_path / "folds.json"
    assert run("split", "--corpus", desk, "--k", 3, "--seed", 7, "--out", plan_path) == 0
    plan = FoldPlan.load(plan_path)
    assert plan.k == 3
    assert len(plan.assignment) == 12
    printed = capsys.readouterr().out
    assert "fold  dialogues  responses" in printed


def test_split_k_too_large_fails(tmp_path, desk):
    assert run("split", "--corpus", desk, "--k", 50, "--out", tmp_path / "f.json") != 0


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory, desk):
    root = tmp_path_factory.mktemp("cli_pipe")
    test_corpus = root / "test.jsonl"
    assert run("synth", "--kind", "desk", "--out", test_corpus, "--dialogues", 4,
               "--responses", 6, "--seed", 17) == 0
    workdir = root / "run"
    code = run(
        "pipeline", "--corpus", desk, "--workdir", workdir, "--test-corpus", test_corpus,
        "--k", 3, "--seed", 11, "--max-epochs", 6, "--patience", 2,
    )
    assert code == 0
    return workdir, test_corpus


def test_pipeline_artifact_tree(pipeline_run):
    workdir, _ = pipeline_run
    manifest = json.loads((workdir / "manifest.json").read_text())
    paths = [a["path"] for a in manifest["artifacts"]]
    assert sum(1 for p in paths if p.endswith("params.bin")) == 3
    for expected in (
        "cleaned.jsonl",
        "cleaning_report.csv",
        "folds.json",
        "metrics/cv_aggregate.json",
        "predictions/pooled_val.csv",
        "ensemble/test_ensemble.csv",
        "analysis/embeddings.csv",
        "analysis/confidence.json",
        "analysis/errors.json",
        "analysis/pca.csv",
    ):
        assert expected in paths
    assert all("sha256" in a and a["bytes"] > 0 for a in manifest["artifacts"])
    assert "workdir" not in manifest["config"]


def test_pipeline_fold_val_predictions_cover_fold(pipeline_run):
    workdir, _ = pipeline_run
    plan = FoldPlan.load(workdir / "folds.json")
    cleaned = load_corpus(workdir / "cleaned.jsonl", TRACK)
    for fold in range(plan.k):
        predictions = PredictionSet.load_csv(workdir / "predictions" / f"fold{fold}_val.csv")
        val_responses = {
            r.response_id
            for d in cleaned.dialogues
            if plan.assignment[d.dialogue_id] == fold
            for r in d.responses
        }
        assert {r.sample_id for r in predictions.rows} == val_responses


def test_pipeline_rerun_identical_manifest(tmp_path, desk, pipeline_run):
    workdir1, test_corpus = pipeline_run
    workdir2 = tmp_path / "again"
    code = run(
        "pipeline", "--corpus", desk, "--workdir", workdir2, "--test-corpus", test_corpus,
        "--k", 3, "--seed", 11, "--max-epochs", 6, "--patience", 2,
    )
    assert code == 0
    assert (workdir1 / "manifest.json").read_bytes() == (workdir2 / "manifest.json").read_bytes()


def test_pipeline_without_test_corpus_skips_ensemble(tmp_path, desk):
    workdir = tmp_path / "noens"
    assert run("pipeline", "--corpus", desk, "--workdir", workdir, "--k", 2,
               "--seed", 3, "--max-epochs", 4, "--patience", 2) == 0
    manifest = json.loads((workdir / "manifest.json").read_text())
    paths = [a["path"] for a in manifest["artifacts"]]
    assert not any(p.startswith("ensemble/") for p in paths)
    assert "metrics/cv_aggregate.json" in paths


def test_pipeline_k_too_large_aborts_at_split(tmp_path, desk, capsys):
    workdir = tmp_path / "badk"
    code = run("pipeline", "--corpus", desk, "--workdir", workdir, "--k", 40)
    assert code == 1
    assert "aborted at stage 'split'" in capsys.readouterr().err
    # earlier stages' artifacts are retained for inspection
    assert (workdir / "cleaned.jsonl").exists()
    assert not (workdir / "manifest.json").exists()


def test_config_file_with_flag_override(tmp_path, desk):
    config = {"corpus": str(desk), "k": 3, "seed": 5, "max_epochs": 4, "patience": 2}
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps(config))
    workdir = tmp_path / "cfg_run"
    assert run("pipeline", "--config", config_path, "--workdir", workdir, "--k", 2) == 0
    assert FoldPlan.load(workdir / "folds.json").k == 2  # flag beat the config file


def test_train_predict_ensemble_evaluate_stages(tmp_path, desk):
    cleaned = tmp_path / "cleaned.jsonl"
    report = tmp_path / "report.csv"
    plan_path = tmp_path / "folds.json"
    workdir = tmp_path / "stages"
    assert run("clean", "--corpus", desk, "--out", cleaned, "--report", report) == 0
    assert run("split", "--corpus", cleaned, "--k", 2, "--seed", 1, "--out", plan_path) == 0
    assert run("train", "--corpus", cleaned, "--folds", plan_path, "--workdir", workdir,
               "--k", 2, "--seed", 1, "--max-epochs", 5, "--patience", 2) == 0

    preds = []
    for fold in range(2):
        out = tmp_path / f"pred{fold}.csv"
        assert run("predict", "--checkpoint", workdir / "checkpoints" / f"fold{fold}",
                   "--corpus", cleaned, "--out", out) == 0
        preds.append(out)
    ens = tmp_path / "ens.csv"
    assert run("ensemble", "--inputs", *preds, "--out", ens) == 0

    metrics_out = tmp_path / "metrics.json"
    assert run("evaluate", "--pred", ens, "--corpus", cleaned, "--out", metrics_out) == 0
    data = json.loads(metrics_out.read_text())
    assert 0.0 <= data["macro_f1"] <= 1.0
    assert "lenient" in data

    # evaluate also accepts a single model's prediction CSV
    metrics_single = tmp_path / "metrics_single.json"
    assert run("evaluate", "--pred", preds[0], "--corpus", cleaned, "--out", metrics_single) == 0


def test_predict_val_only_restricts_samples(tmp_path, desk):
    cleaned = tmp_path / "cleaned.jsonl"
    plan_path = tmp_path / "folds.json"
    workdir = tmp_path / "valonly"
    assert run("clean", "--corpus", desk, "--out", cleaned, "--report", tmp_path / "r.csv") == 0
    assert run("split", "--corpus", cleaned, "--k", 2, "--seed", 2, "--out", plan_path) == 0
    assert run("train", "--corpus", cleaned, "--folds", plan_path, "--workdir", workdir,
               "--fold", 0, "--seed", 2, "--max-epochs", 4, "--patience", 2) == 0
    out = tmp_path / "val0.csv"
    assert run("predict", "--checkpoint", workdir / "checkpoints" / "fold0",
               "--corpus", cleaned, "--folds", plan_path, "--val-only", "--out", out) == 0
    predictions = PredictionSet.load_csv(out)
    plan = FoldPlan.load(plan_path)
    cleaned_corpus = load_corpus(cleaned, TRACK)
    val_count = sum(
        len(d.responses) for d in cleaned_corpus.dialogues if plan.assignment[d.dialogue_id] == 0
    )
    assert len(predictions.rows) == val_count


def test_analyze_standalone(tmp_path, desk, pipeline_run):
    workdir, _ = pipeline_run
    assert run("analyze", "--corpus", workdir / "cleaned.jsonl", "--workdir", workdir) == 0
    assert (workdir / "analysis" / "confidence.txt").exists()


def test_train_parallel_jobs_matches_serial(tmp_path, desk):
    cleaned = tmp_path / "cleaned.jsonl"
    plan_path = tmp_path / "folds.json"
    assert run("clean", "--corpus", desk, "--out", cleaned, "--report", tmp_path / "r.csv") == 0
    assert run("split", "--corpus", cleaned, "--k", 2, "--seed", 4, "--out", plan_path) == 0
    serial, parallel = tmp_path / "serial", tmp_path / "parallel"
    for workdir, jobs in ((serial, 1), (parallel, 2)):
        assert run("train", "--corpus", cleaned, "--folds", plan_path, "--workdir", workdir,
                   "--seed", 4, "--max-epochs", 4, "--patience", 2, "--jobs", jobs) == 0
    for fold in range(2):
        a = (serial / "checkpoints" / f"fold{fold}" / "params.bin").read_bytes()
        b = (parallel / "checkpoints" / f"fold{fold}" / "params.bin").read_bytes()
        assert a == b
