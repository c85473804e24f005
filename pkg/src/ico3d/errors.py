"""Exception hierarchy shared across the engine.

Every error raised on a documented failure path derives from :class:`Ico3dError`
so callers (and the CLI) can distinguish engine diagnostics from genuine bugs.
"""


class Ico3dError(Exception):
    """Base class for all engine errors."""


class InvalidInputError(Ico3dError):
    """A caller-supplied value violates a documented precondition."""


class NumericalSingularityError(Ico3dError):
    """A matrix required to be invertible is singular or hopelessly conditioned."""


class BranchAmbiguityError(Ico3dError):
    """SE(3) logarithm requested at or beyond the pi rotation branch cut."""


class ModelCorruptError(Ico3dError):
    """Model weights contain NaN/Inf and cannot be evaluated."""


class DivergenceError(Ico3dError):
    """An optimization loop produced a non-finite loss."""


class SessionBusyError(Ico3dError):
    """A conversational turn arrived while the avatar is still acting."""


class StageFailureError(Ico3dError):
    """A pipeline stage (ASR/LLM/TTS/expression) timed out or failed."""


class BundleError(Ico3dError):
    """Base class for model-bundle I/O failures."""


class BundleVersionError(BundleError):
    """Bad magic bytes or unsupported container version."""


class BundleTruncatedError(BundleError):
    """File ended before a declared chunk or payload was complete."""


class BundleNaNError(BundleError):
    """A payload array contains NaN or Inf."""


class BundleFormatError(BundleError):
    """Structurally malformed chunk, header, or embedded splat payload."""
