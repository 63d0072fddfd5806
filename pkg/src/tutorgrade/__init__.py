"""tutorgrade: assess tutor responses in educational dialogues.

Classifies tutor replies into No / To some extent / Yes for the mistake
identification and mistake location tracks. The pipeline covers response
sanitization, grouped cross-validation training with class-weighted loss,
checkpoint selection on validation macro-F1, hard-voting ensembling, and
exact/lenient evaluation with analysis exports.
"""

from tutorgrade.corpus import (
    Corpus,
    Dialogue,
    Label,
    Turn,
    TutorResponse,
    label_distribution,
    load_corpus,
    save_corpus,
)
from tutorgrade.kernels import ACTIVE_KERNEL

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_KERNEL",
    "Corpus",
    "Dialogue",
    "Label",
    "Turn",
    "TutorResponse",
    "label_distribution",
    "load_corpus",
    "save_corpus",
    "__version__",
]
