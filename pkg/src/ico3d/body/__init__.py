"""Dynamic body model: sliding windows, hexplane features, tunable deforms."""

from .deform import (
    HIDDEN,
    LEAKY_SLOPE,
    M_MODES,
    OUT_DIM,
    TunableMlp,
    mlp_forward,
    new_mlp,
    softmax,
    tunable_layer,
)
from .hexplane import (
    DEFAULT_FEATURE_DIM,
    DEFAULT_RESOLUTIONS,
    PLANES,
    HexplaneEncoder,
    new_encoder,
    st_encode,
)
from .model import (
    BodyModel,
    WindowModel,
    body_from_arrays,
    body_to_arrays,
    bounds_of_means,
    deform,
    deform_at_frame,
    new_window_model,
)
from .train import (
    BodyFitConfig,
    FinetuneTrace,
    consistency_loss,
    finetune_window,
)
from .windows import (
    MAX_WINDOW_CAP,
    MotionSignal,
    WindowPlan,
    motion_from_frames,
    partition_windows,
)

__all__ = [
    "HIDDEN",
    "LEAKY_SLOPE",
    "M_MODES",
    "OUT_DIM",
    "TunableMlp",
    "mlp_forward",
    "new_mlp",
    "softmax",
    "tunable_layer",
    "DEFAULT_FEATURE_DIM",
    "DEFAULT_RESOLUTIONS",
    "PLANES",
    "HexplaneEncoder",
    "new_encoder",
    "st_encode",
    "BodyModel",
    "WindowModel",
    "body_from_arrays",
    "body_to_arrays",
    "bounds_of_means",
    "deform",
    "deform_at_frame",
    "new_window_model",
    "BodyFitConfig",
    "FinetuneTrace",
    "consistency_loss",
    "finetune_window",
    "MAX_WINDOW_CAP",
    "MotionSignal",
    "WindowPlan",
    "motion_from_frames",
    "partition_windows",
]
