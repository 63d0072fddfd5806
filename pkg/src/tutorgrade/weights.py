"""Class weights for the weighted cross-entropy loss.

Three schemes: the balanced formula total/(num_classes * class_count), a
log-inverse-frequency formula 1/ln(count + eps), and verbatim manual
vectors. The submitted-system defaults are the manual per-track vectors;
the formulas are available as generators. Natural log is used for the
log-inverse scheme and pinned by tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from tutorgrade.corpus import LABELS, NUM_CLASSES, Label

# Lightly tuned per-track vectors, ordered (No, To some extent, Yes).
MANUAL_VECTORS = {
    "mistake_identification": (1.0, 3.0, 0.5),
    "mistake_location": (0.8, 2.2, 0.9),
}

DEFAULT_LOG_EPSILON = 1.05


class WeightError(ValueError):
    """Weight vector or its inputs are invalid."""


@dataclass(frozen=True)
class ClassWeightSpec:
    scheme: str  # "balanced" | "log_inverse" | "manual"
    weights: tuple[float, float, float]  # indexed by Label order
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.weights) != NUM_CLASSES:
            raise WeightError(f"expected {NUM_CLASSES} weights, got {len(self.weights)}")
        for w in self.weights:
            if not (math.isfinite(w) and w > 0):
                raise WeightError(f"weights must be positive and finite, got {w!r}")

    def weight_for(self, label: Label) -> float:
        return self.weights[int(label)]

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "weights": list(self.weights), "params": self.params}

    @classmethod
    def from_dict(cls, data: dict) -> "ClassWeightSpec":
        return cls(data["scheme"], tuple(data["weights"]), dict(data.get("params", {})))


def _ordered_counts(counts: Mapping[Label, int]) -> list[int]:
    missing = [label for label in LABELS if label not in counts]
    if missing:
        raise WeightError(f"missing counts for {missing}")
    return [counts[label] for label in LABELS]


def balanced_weights(counts: Mapping[Label, int]) -> ClassWeightSpec:
    """w_c = total / (num_classes * count_c); boosts rare classes proportionally."""
    ordered = _ordered_counts(counts)
    if any(c < 1 for c in ordered):
        raise WeightError(f"all class counts must be >= 1, got {ordered}")
    total = sum(ordered)
    weights = tuple(total / (NUM_CLASSES * c) for c in ordered)
    return ClassWeightSpec("balanced", weights, {"total": total})


def log_inverse_weights(
    counts: Mapping[Label, int], epsilon: float = DEFAULT_LOG_EPSILON
) -> ClassWeightSpec:
    """w_c = 1 / ln(count_c + epsilon); a gentler alternative to balanced."""
    ordered = _ordered_counts(counts)
    if any(c < 1 for c in ordered):
        raise WeightError(f"all class counts must be >= 1, got {ordered}")
    if any(c + epsilon <= 1.0 for c in ordered):
        raise WeightError(f"count + epsilon must exceed 1 for every class (epsilon={epsilon})")
    weights = tuple(1.0 / math.log(c + epsilon) for c in ordered)
    return ClassWeightSpec("log_inverse", weights, {"epsilon": epsilon})


def manual_weights(vector: Sequence[float]) -> ClassWeightSpec:
    """Store a hand-chosen 3-vector verbatim."""
    if len(vector) != NUM_CLASSES:
        raise WeightError(f"manual vector must have {NUM_CLASSES} entries, got {len(vector)}")
    return ClassWeightSpec("manual", tuple(float(w) for w in vector))


def parse_weights_arg(
    arg: str, counts: Mapping[Label, int] | None = None, track: str | None = None
) -> ClassWeightSpec:
    """Resolve a CLI --weights value: "balanced", "log", or "manual[:w0,w1,w2]".

    "manual" with no vector falls back to the active track's default vector.
    The formula schemes need label counts from an annotated corpus.
    """
    if arg == "balanced" or arg == "log":
        if counts is None:
            raise WeightError(f"--weights {arg} needs an annotated corpus to count classes")
        return balanced_weights(counts) if arg == "balanced" else log_inverse_weights(counts)
    if arg == "manual":
        if track not in MANUAL_VECTORS:
            raise WeightError(f"no default manual vector for track {track!r}")
        return manual_weights(MANUAL_VECTORS[track])
    if arg.startswith("manual:"):
        try:
            vector = [float(x) for x in arg.split(":", 1)[1].split(",")]
        except ValueError:
            raise WeightError(f"cannot parse manual weight vector from {arg!r}") from None
        return manual_weights(vector)
    raise WeightError(f"unknown weights scheme {arg!r}")
