"""Expression-conditioned Gaussian head: feature blending, MLP decode, fitting."""

from .expression import (
    EXPRESSION_COLUMNS,
    ExpressionStream,
    OscillatorConfig,
    expression_stream,
    oscillator_stream,
    read_expression_csv,
    write_expression_csv,
)
from .model import (
    DEFAULT_CHANNELS,
    DEFAULT_LATENT,
    DEFAULT_PE_LEVELS,
    N_AUDIO,
    N_EYE,
    HeadFitConfig,
    HeadGrads,
    HeadModel,
    blend_features,
    fit_head,
    head_backward,
    head_forward,
    head_from_arrays,
    head_to_arrays,
    new_head_model,
    positional_encoding,
)

__all__ = [
    "DEFAULT_CHANNELS",
    "DEFAULT_LATENT",
    "DEFAULT_PE_LEVELS",
    "EXPRESSION_COLUMNS",
    "ExpressionStream",
    "HeadFitConfig",
    "HeadGrads",
    "HeadModel",
    "N_AUDIO",
    "N_EYE",
    "OscillatorConfig",
    "blend_features",
    "expression_stream",
    "fit_head",
    "head_backward",
    "head_forward",
    "head_from_arrays",
    "head_to_arrays",
    "new_head_model",
    "oscillator_stream",
    "positional_encoding",
    "read_expression_csv",
    "write_expression_csv",
]
