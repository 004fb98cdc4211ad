"""Natural adversarial example synthesis against frozen image classifiers.

The toolkit optimizes the token embedding of a class keyword (or, for
ablations, the full text embedding or the latent) so that a frozen
conditional generator renders images a frozen classifier gets wrong, while a
human oracle confirms the images still look like the intended class.
"""

from __future__ import annotations

from .errors import (
    AmbiguousKeyword,
    CampaignAborted,
    CorruptCampaign,
    DegenerateInput,
    FixtureBuildFailed,
    FixtureIntegrityError,
    InvalidConfig,
    InvalidImage,
    InvalidLabel,
    InvalidShape,
    KeywordNotFound,
    LatentSearchExhausted,
    NoViableClasses,
    NumericalDivergence,
    PendingReview,
    PromptTooLong,
    ToolkitError,
    UnknownToken,
)
from .interfaces import (
    Backend,
    ImageClassifier,
    ImageGenerator,
    Oracle,
    TextEncoder,
    class_index_for,
    create_backend,
    register_backend,
    registered_backends,
)
from .objective import (
    embedding_regularizer,
    id_to_ood_loss,
    targeted_ce_loss,
    total_objective,
    uniform_loss_floor,
    untargeted_loss,
)
from .optimizer import (
    OptimizationConfig,
    OptimizationTrace,
    StepRecord,
    is_success_relaxed,
    is_success_strict,
    rademacher_sweep,
    run_optimization,
)
from .seeds import derive_seed, draw_latent
from .tokens import locate_class_token_indices, resolve_class_tokens
from .types import (
    ATTACK_MODES,
    REGULARIZER_METRICS,
    AttackSpec,
    ImageTensor,
    LatentVector,
    ObjectiveValue,
    OracleLabel,
    TextEmbedding,
    TokenEmbeddingSequence,
)

# Imported for their register_backend side effects so create_backend("toy")
# and create_backend("analytic") work without extra imports.
from .toy import analytic as _analytic_backend  # noqa: E402,F401
from .toy import fixtures as _toy_backend  # noqa: E402,F401

__version__ = "0.1.0"

__all__ = [
    "ATTACK_MODES",
    "REGULARIZER_METRICS",
    "AmbiguousKeyword",
    "AttackSpec",
    "Backend",
    "CampaignAborted",
    "CorruptCampaign",
    "DegenerateInput",
    "FixtureBuildFailed",
    "FixtureIntegrityError",
    "ImageClassifier",
    "ImageGenerator",
    "ImageTensor",
    "InvalidConfig",
    "InvalidImage",
    "InvalidLabel",
    "InvalidShape",
    "KeywordNotFound",
    "LatentSearchExhausted",
    "LatentVector",
    "NoViableClasses",
    "NumericalDivergence",
    "ObjectiveValue",
    "OptimizationConfig",
    "OptimizationTrace",
    "Oracle",
    "OracleLabel",
    "PendingReview",
    "PromptTooLong",
    "StepRecord",
    "TextEmbedding",
    "TextEncoder",
    "TokenEmbeddingSequence",
    "ToolkitError",
    "UnknownToken",
    "class_index_for",
    "create_backend",
    "derive_seed",
    "draw_latent",
    "embedding_regularizer",
    "id_to_ood_loss",
    "is_success_relaxed",
    "is_success_strict",
    "locate_class_token_indices",
    "rademacher_sweep",
    "registered_backends",
    "register_backend",
    "resolve_class_tokens",
    "run_optimization",
    "targeted_ce_loss",
    "total_objective",
    "uniform_loss_floor",
    "untargeted_loss",
]
