"""Per-fold classifier: dropout + linear head over an encoder backend.

The head maps a sentence vector to 3 logits (p = W . Drop(h) + b) and is
trained with class-weighted cross-entropy by plain mini-batch gradient
descent. Checkpoints keep the epoch whose validation macro-F1 was highest;
training stops early after `patience` epochs without improvement.

Only the head is optimized here. A trainable backend (e.g. a fine-tuned
transformer adapter) receives the embedding gradients through its own
update() hook each step.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from tutorgrade.backends import EncoderBackend
from tutorgrade.corpus import NUM_CLASSES, Corpus, Label
from tutorgrade.folds import FoldPlan
from tutorgrade.metrics import compute_report
from tutorgrade.preprocess import (
    DEFAULT_GREETING_LEXICON,
    ModelInput,
    build_model_input,
)
from tutorgrade.weights import ClassWeightSpec


class ClassifyError(ValueError):
    """Dimension mismatch, non-finite values, or an unusable split."""


SCHEDULES = ("constant", "linear_decay")


@dataclass
class ClassificationHead:
    weight_matrix: np.ndarray  # (3, dim)
    bias: np.ndarray  # (3,)
    dropout_rate: float = 0.1

    def __post_init__(self):
        self.weight_matrix = np.asarray(self.weight_matrix, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if (
            self.weight_matrix.ndim != 2
            or self.weight_matrix.shape[0] != NUM_CLASSES
            or self.bias.shape != (NUM_CLASSES,)
        ):
            raise ClassifyError(
                f"bad head shapes: W {self.weight_matrix.shape}, b {self.bias.shape}"
            )
        if not (np.isfinite(self.weight_matrix).all() and np.isfinite(self.bias).all()):
            raise ClassifyError("head parameters must be finite")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ClassifyError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def dim(self) -> int:
        return self.weight_matrix.shape[1]

    def copy(self) -> "ClassificationHead":
        return ClassificationHead(
            self.weight_matrix.copy(), self.bias.copy(), self.dropout_rate
        )


def init_head(dim: int, seed: int, dropout_rate: float = 0.1) -> ClassificationHead:
    rng = np.random.default_rng(seed)
    return ClassificationHead(
        rng.normal(0.0, 0.02, size=(NUM_CLASSES, dim)), np.zeros(NUM_CLASSES), dropout_rate
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(z).all():
        raise ClassifyError("non-finite logits")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _dropout(h: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    # Inverted dropout: kept units scaled by 1/(1-rate) so eval needs no rescale.
    mask = rng.random(h.shape) >= rate
    return h * mask / (1.0 - rate)


def forward(
    head: ClassificationHead,
    h: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Logits and softmax probabilities for one vector or a (n, dim) batch."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != head.dim:
        raise ClassifyError(f"embedding dim {h.shape[-1]} != head dim {head.dim}")
    if train_mode and head.dropout_rate > 0.0:
        if rng is None:
            raise ClassifyError("train-mode forward needs a seeded rng for dropout")
        h = _dropout(h, head.dropout_rate, rng)
    logits = h @ head.weight_matrix.T + head.bias
    return logits, softmax(logits)


def weighted_cross_entropy(
    logits: np.ndarray, gold: Label | Sequence[Label], spec: ClassWeightSpec
) -> tuple[float, np.ndarray]:
    """Class-weighted cross-entropy and its gradient w.r.t. the logits.

    Per sample: loss = w_gold * (-log softmax(logits)[gold]) and
    grad = w_gold * (softmax(logits) - onehot(gold)). For a batch the loss
    is the mean over samples and the gradient rows stay per-sample.
    """
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    golds = np.array([int(gold)] if single else [int(g) for g in gold])
    if len(golds) != z.shape[0]:
        raise ClassifyError(f"{z.shape[0]} logit rows but {len(golds)} gold labels")
    probs = softmax(z)
    w = np.array([spec.weights[g] for g in golds])
    zs = z - z.max(axis=1, keepdims=True)
    log_probs = zs - np.log(np.exp(zs).sum(axis=1, keepdims=True))
    losses = -w * log_probs[np.arange(len(golds)), golds]
    grad = probs.copy()
    grad[np.arange(len(golds)), golds] -= 1.0
    grad *= w[:, None]
    loss = float(losses.mean())
    return loss, (grad[0] if single else grad)


@dataclass
class TrainConfig:
    learning_rate: float = 2e-5
    batch_size: int = 32
    max_epochs: int = 10
    patience: int = 2
    schedule: str = "linear_decay"
    seed: int = 42
    weights: ClassWeightSpec | None = None
    truncation: int = 300

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ClassifyError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ClassifyError("batch_size and max_epochs must be positive")
        if not self.patience < self.max_epochs:
            raise ClassifyError(
                f"patience ({self.patience}) must be below max_epochs ({self.max_epochs})"
            )
        if self.schedule not in SCHEDULES:
            raise ClassifyError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")


@dataclass
class LogEntry:
    epoch: int
    train_loss: float
    val_macro_f1: float


@dataclass
class Checkpoint:
    fold: int
    head: ClassificationHead
    backend_ref: str
    best_val_macro_f1: float
    epoch: int
    seed: int
    log: list[LogEntry] = field(default_factory=list)

    def save(self, directory: str | Path) -> None:
        """Directory layout: manifest.json + params.bin (little-endian f64) + log CSV."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "dim": self.head.dim,
            "fold": self.fold,
            "epoch": self.epoch,
            "best_val_macro_f1": self.best_val_macro_f1,
            "seed": self.seed,
            "backend": self.backend_ref,
            "dropout_rate": self.head.dropout_rate,
        }
        with open(directory / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        params = np.concatenate([self.head.weight_matrix.ravel(), self.head.bias])
        (directory / "params.bin").write_bytes(params.astype("<f8").tobytes())
        with open(directory / "training_log.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "train_loss", "val_macro_f1"])
            for entry in self.log:
                writer.writerow([entry.epoch, repr(entry.train_loss), repr(entry.val_macro_f1)])

    @classmethod
    def load(cls, directory: str | Path) -> "Checkpoint":
        directory = Path(directory)
        with open(directory / "manifest.json", encoding="utf-8") as fh:
            manifest = json.load(fh)
        dim = manifest["dim"]
        params = np.frombuffer((directory / "params.bin").read_bytes(), dtype="<f8")
        if params.size != NUM_CLASSES * dim + NUM_CLASSES:
            raise ClassifyError(f"params.bin size does not match dim={dim}")
        head = ClassificationHead(
            params[: NUM_CLASSES * dim].reshape(NUM_CLASSES, dim).copy(),
            params[NUM_CLASSES * dim :].copy(),
            manifest.get("dropout_rate", 0.1),
        )
        log = []
        log_path = directory / "training_log.csv"
        if log_path.exists():
            with open(log_path, encoding="utf-8", newline="") as fh:
                for row in csv.DictReader(fh):
                    log.append(
                        LogEntry(int(row["epoch"]), float(row["train_loss"]), float(row["val_macro_f1"]))
                    )
        return cls(
            fold=manifest["fold"],
            head=head,
            backend_ref=manifest["backend"],
            best_val_macro_f1=manifest["best_val_macro_f1"],
            epoch=manifest["epoch"],
            seed=manifest["seed"],
            log=log,
        )


@dataclass
class PredictionRow:
    sample_id: str
    label: Label
    probs: tuple[float, float, float]


@dataclass
class PredictionSet:
    model_id: int
    rows: list[PredictionRow]

    def validate(self) -> None:
        for row in self.rows:
            p = np.asarray(row.probs)
            if (p < 0).any() or abs(float(p.sum()) - 1.0) > 1e-9:
                raise ClassifyError(f"{row.sample_id}: invalid probability vector {row.probs}")
            if int(row.label) != int(np.argmax(p)):
                raise ClassifyError(f"{row.sample_id}: label is not the argmax of probs")

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["sample_id", "fold", "pred", "p_no", "p_some", "p_yes"])
            for row in self.rows:
                writer.writerow(
                    [row.sample_id, self.model_id, row.label.canonical()]
                    + [repr(p) for p in row.probs]
                )

    @classmethod
    def load_csv(cls, path: str | Path) -> "PredictionSet":
        rows = []
        model_id = 0
        with open(path, encoding="utf-8", newline="") as fh:
            for record in csv.DictReader(fh):
                model_id = int(record["fold"])
                rows.append(
                    PredictionRow(
                        record["sample_id"],
                        Label.from_string(record["pred"]),
                        (float(record["p_no"]), float(record["p_some"]), float(record["p_yes"])),
                    )
                )
        return cls(model_id=model_id, rows=rows)


def corpus_model_inputs(
    corpus: Corpus,
    token_count: Callable[[str], int],
    budget: int,
    greeting_lexicon: Sequence[str] = DEFAULT_GREETING_LEXICON,
) -> tuple[list[str], list[ModelInput]]:
    """Assemble one classifier input per response, aligned with response ids."""
    ids, inputs = [], []
    for d, r in corpus.response_items():
        ids.append(r.response_id)
        inputs.append(
            build_model_input(d.history, r.text_for_model, token_count, budget, greeting_lexicon)
        )
    return ids, inputs


def _split_fold(corpus: Corpus, plan: FoldPlan, fold: int):
    if fold not in range(plan.k):
        raise ClassifyError(f"fold {fold} out of range for k={plan.k}")
    missing = [d.dialogue_id for d in corpus.dialogues if d.dialogue_id not in plan.assignment]
    if missing:
        raise ClassifyError(f"fold plan is missing dialogues: {missing[:5]}")
    train = [d for d in corpus.dialogues if plan.assignment[d.dialogue_id] != fold]
    val = [d for d in corpus.dialogues if plan.assignment[d.dialogue_id] == fold]
    if not train or not val:
        raise ClassifyError(f"fold {fold}: empty train or validation split")
    return Corpus(train, corpus.track), Corpus(val, corpus.track)


def _epoch_lr(config: TrainConfig, epoch: int) -> float:
    if config.schedule == "constant":
        return config.learning_rate
    # Linear decay reaching zero at max_epochs.
    return config.learning_rate * (1.0 - (epoch - 1) / config.max_epochs)


def train_fold(
    corpus: Corpus,
    plan: FoldPlan,
    fold: int,
    backend: EncoderBackend,
    config: TrainConfig,
    val_scorer: Callable[[ClassificationHead], float] | None = None,
) -> Checkpoint:
    """Train on the fold's training dialogues, checkpoint on validation macro-F1.

    Deterministic for a fixed (corpus, plan, config) tuple: the fold owns an
    RNG seeded with seed + fold. `val_scorer` replaces the validation pass
    (a testing seam for exercising the early-stopping rule).
    """
    if config.weights is None:
        raise ClassifyError("TrainConfig.weights must be set before training")
    train_corpus, val_corpus = _split_fold(corpus, plan, fold)

    train_ids, train_inputs = corpus_model_inputs(train_corpus, backend.token_count, config.truncation)
    val_ids, val_inputs = corpus_model_inputs(val_corpus, backend.token_count, config.truncation)
    gold = {r.response_id: r.label_for(corpus.track) for r in corpus.responses()}
    y_train = np.array([int(gold[i]) for i in train_ids])
    val_gold = [gold[i] for i in val_ids]

    train_texts = [m.text for m in train_inputs]
    X_train = np.asarray(backend.encode_batch(train_texts), dtype=np.float64)
    X_val = np.asarray(backend.encode_batch([m.text for m in val_inputs]), dtype=np.float64)

    rng = np.random.default_rng(config.seed + fold)
    head = init_head(backend.dim, seed=config.seed + fold)

    def validation_score() -> float:
        if val_scorer is not None:
            return val_scorer(head)
        _, probs = forward(head, X_val, train_mode=False)
        preds = [Label(int(i)) for i in np.argmax(probs, axis=1)]
        return compute_report(val_gold, preds, lenient=False).macro_f1

    best: Checkpoint | None = None
    best_score = -1.0
    epochs_since_improvement = 0
    log: list[LogEntry] = []

    for epoch in range(1, config.max_epochs + 1):
        lr = _epoch_lr(config, epoch)
        order = rng.permutation(len(train_ids))
        total_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            H = X_train[idx]
            if head.dropout_rate > 0.0:
                H = _dropout(H, head.dropout_rate, rng)
            logits = H @ head.weight_matrix.T + head.bias
            loss, grad_logits = weighted_cross_entropy(
                logits, [Label(int(g)) for g in y_train[idx]], config.weights
            )
            total_loss += loss * len(idx)
            grad_w = grad_logits.T @ H / len(idx)
            grad_b = grad_logits.mean(axis=0)
            if backend.trainable:
                backend.update(
                    [train_texts[i] for i in idx], grad_logits @ head.weight_matrix, lr
                )
            head.weight_matrix -= lr * grad_w
            head.bias -= lr * grad_b

        score = validation_score()
        log.append(LogEntry(epoch, total_loss / len(train_ids), score))
        if score > best_score:
            best_score = score
            best = Checkpoint(
                fold=fold,
                head=head.copy(),
                backend_ref=backend.ref(),
                best_val_macro_f1=score,
                epoch=epoch,
                seed=config.seed,
            )
            epochs_since_improvement = 0
        else:
            epochs_since_improvement += 1
            if epochs_since_improvement >= config.patience:
                break

    assert best is not None
    best.log = log
    return best


def predict_with_confidence(
    checkpoint: Checkpoint,
    backend: EncoderBackend,
    inputs: Sequence[ModelInput],
    sample_ids: Sequence[str] | None = None,
) -> PredictionSet:
    """Eval-mode predictions with softmax confidence for every input."""
    if backend.dim != checkpoint.head.dim:
        raise ClassifyError(
            f"backend dim {backend.dim} does not match checkpoint dim {checkpoint.head.dim}"
        )
    if sample_ids is None:
        sample_ids = [str(i) for i in range(len(inputs))]
    if len(sample_ids) != len(inputs):
        raise ClassifyError(f"{len(inputs)} inputs but {len(sample_ids)} sample ids")
    if not inputs:
        return PredictionSet(model_id=checkpoint.fold, rows=[])
    X = np.asarray(backend.encode_batch([m.text for m in inputs]), dtype=np.float64)
    _, probs = forward(checkpoint.head, X, train_mode=False)
    rows = [
        PredictionRow(sid, Label(int(np.argmax(p))), (float(p[0]), float(p[1]), float(p[2])))
        for sid, p in zip(sample_ids, probs)
    ]
    result = PredictionSet(model_id=checkpoint.fold, rows=rows)
    result.validate()
    return result
