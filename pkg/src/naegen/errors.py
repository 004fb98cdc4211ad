"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit-specific errors."""


class KeywordNotFound(ToolkitError):
    """The class keyword does not occur in the prompt."""


class AmbiguousKeyword(ToolkitError):
    """The class keyword occurs more than once in the prompt."""


class UnknownToken(ToolkitError):
    """A prompt word is outside the tokenizer vocabulary."""


class PromptTooLong(ToolkitError):
    """Tokenized prompt exceeds the encoder's padded length."""


class InvalidImage(ToolkitError):
    """Image tensor violates its declared invariants (shape, range, finiteness)."""


class InvalidLabel(ToolkitError):
    """Class label outside the classifier's label range."""


class InvalidShape(ToolkitError):
    """Tensor arguments have incompatible or unsupported shapes."""


class DegenerateInput(ToolkitError):
    """Input is degenerate for the requested metric (e.g. zero-norm cosine)."""


class InvalidConfig(ToolkitError):
    """Configuration value violates its contract.

    ``details`` may carry a per-key list of problems so callers can surface
    every bad key at once.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = list(details) if details else []


class NumericalDivergence(ToolkitError):
    """A numerical evaluation produced non-finite values."""


class PendingReview(ToolkitError):
    """Success cannot be decided because the oracle label is missing."""


class FixtureBuildFailed(ToolkitError):
    """Fixture construction did not meet its quality invariants."""


class FixtureIntegrityError(ToolkitError):
    """Stored fixture bytes do not match their recorded digests."""


class NoViableClasses(ToolkitError):
    """Class prefiltering removed every candidate class."""


class LatentSearchExhausted(ToolkitError):
    """Could not find enough correctly-classified initializations."""


class CampaignAborted(ToolkitError):
    """More than half of the campaign runs failed."""


class CorruptCampaign(ToolkitError):
    """Campaign directory is missing artifacts or digests do not match."""


class NotFound(ToolkitError):
    """Requested entity does not exist."""


class ValidationError(ToolkitError):
    """Submitted payload is structurally valid JSON but semantically malformed."""
