from .bundle import Bundle, load_bundle, save_bundle
from .camera import CameraModel, default_camera, look_at
from .gaussians import GaussianSet, concat, random_set
from .pose import Pose, interpolate_pose, se3_exp, se3_log
from .quaternion import build_covariance, build_covariances, eval_gaussian
from .sh import eval_sh, num_coeffs

__all__ = [
    "Bundle", "CameraModel", "GaussianSet", "Pose",
    "build_covariance", "build_covariances", "concat", "default_camera",
    "eval_gaussian", "eval_sh", "interpolate_pose", "load_bundle", "look_at",
    "num_coeffs", "random_set", "save_bundle", "se3_exp", "se3_log",
]
