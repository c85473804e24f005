"""Per-window dynamic body model: canonical splats + deformation field.

A WindowModel owns a canonical GaussianSet for one frame window, a hexplane
encoder, a tunable deformation MLP, and per-Gaussian blend logits over the
MLP's motion modes. deform(window, t) evaluates the field at normalized
window time t and returns the posed GaussianSet: means shifted by d_mu,
quaternions renormalized after an additive 4-vector delta, and log-scales
shifted so scales multiply by exp(d_logscale).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.gaussians import GaussianSet
from ..errors import InvalidInputError, ModelCorruptError
from . import deform as deform_mod
from . import hexplane

_BOUNDS_MARGIN = 0.05


@dataclass
class WindowModel:
    canonical: GaussianSet
    frame_range: tuple[int, int]
    encoder: hexplane.HexplaneEncoder
    mlp: deform_mod.TunableMlp
    blend: np.ndarray                     # (N, M) free logits, softmaxed on use
    bounds: np.ndarray = field(default_factory=lambda: np.array(
        [[-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]]))

    def __post_init__(self) -> None:
        start, end = (int(v) for v in self.frame_range)
        if end <= start:
            raise InvalidInputError(
                f"frame_range [{start},{end}] must span at least 2 frames")
        self.frame_range = (start, end)
        self.blend = np.ascontiguousarray(self.blend, dtype=np.float64)
        if self.blend.shape != (self.canonical.count, self.mlp.modes):
            raise InvalidInputError(
                f"blend must have shape ({self.canonical.count}, {self.mlp.modes})")
        self.bounds = np.ascontiguousarray(self.bounds, dtype=np.float64)
        if self.bounds.shape != (2, 3) or np.any(self.bounds[1] <= self.bounds[0]):
            raise InvalidInputError("bounds must be (2,3) with hi > lo per axis")
        if self.mlp.in_dim != self.encoder.out_dim:
            raise InvalidInputError(
                f"MLP expects input dim {self.mlp.in_dim}, encoder outputs "
                f"{self.encoder.out_dim}")
        if self.mlp.out_dim != deform_mod.OUT_DIM:
            raise InvalidInputError(
                f"deformation MLP must output {deform_mod.OUT_DIM} values")

    @property
    def n_frames(self) -> int:
        return self.frame_range[1] - self.frame_range[0] + 1

    def alpha(self) -> np.ndarray:
        """Normalized per-Gaussian mode blend."""
        return deform_mod.softmax(self.blend)

    def frame_time(self, frame: int) -> float:
        """Normalized time in [0,1] of an absolute frame index."""
        start, end = self.frame_range
        if not start <= frame <= end:
            raise InvalidInputError(
                f"frame {frame} outside window [{start},{end}]")
        return (frame - start) / (end - start)

    def normalized_means(self) -> np.ndarray:
        lo, hi = self.bounds[0], self.bounds[1]
        return (self.canonical.means - lo) / (hi - lo)

    def copy(self) -> "WindowModel":
        return WindowModel(
            canonical=self.canonical.copy(),
            frame_range=self.frame_range,
            encoder=self.encoder.copy(),
            mlp=self.mlp.copy(),
            blend=self.blend.copy(),
            bounds=self.bounds.copy(),
        )

    def take(self, indices: np.ndarray) -> "WindowModel":
        """Window restricted to a subset of its Gaussians (field shared)."""
        return WindowModel(
            canonical=self.canonical.take(indices),
            frame_range=self.frame_range,
            encoder=self.encoder.copy(),
            mlp=self.mlp.copy(),
            blend=self.blend[np.asarray(indices, dtype=np.int64)].copy(),
            bounds=self.bounds.copy(),
        )


def bounds_of_means(means: np.ndarray, margin: float = _BOUNDS_MARGIN) -> np.ndarray:
    """Axis-aligned [lo, hi] box around the means, padded so queries stay
    strictly inside the encoder's unit domain."""
    means = np.atleast_2d(np.asarray(means, dtype=np.float64))
    lo = means.min(axis=0)
    hi = means.max(axis=0)
    span = np.maximum(hi - lo, 1e-6)
    return np.stack([lo - margin * span, hi + margin * span])


def new_window_model(rng: np.random.Generator, canonical: GaussianSet,
                     frame_range: tuple[int, int],
                     resolutions=hexplane.DEFAULT_RESOLUTIONS,
                     feature_dim: int = hexplane.DEFAULT_FEATURE_DIM,
                     hidden: int = deform_mod.HIDDEN,
                     modes: int = deform_mod.M_MODES) -> WindowModel:
    """Fresh window: near-one encoder grids, zero final MLP layer (identity
    deformation), uniform mode blend."""
    if canonical.count == 0:
        raise InvalidInputError("a window needs a nonempty canonical set")
    encoder = hexplane.new_encoder(rng, resolutions, feature_dim)
    mlp = deform_mod.new_mlp(rng, encoder.out_dim, hidden=hidden, modes=modes)
    return WindowModel(
        canonical=canonical,
        frame_range=frame_range,
        encoder=encoder,
        mlp=mlp,
        blend=np.zeros((canonical.count, modes)),
        bounds=bounds_of_means(canonical.means),
    )


def deform(window: WindowModel, t: float) -> GaussianSet:
    """Canonical set posed at normalized window time t in [0,1]."""
    if not np.isfinite(t) or not 0.0 <= t <= 1.0:
        raise InvalidInputError(f"normalized time {t} outside [0,1]")
    feats = hexplane.st_encode(window.encoder, window.normalized_means(), t)
    delta = deform_mod.mlp_forward(window.mlp, feats, window.alpha())
    if not np.isfinite(delta).all():
        raise ModelCorruptError("deformation produced NaN/Inf")
    if not delta.any():
        # exact identity (zero-initialized output layer): renormalizing the
        # quaternions would otherwise perturb the last bit
        return window.canonical.copy()
    d_mu = delta[:, :3]
    d_rot = delta[:, 3:7]
    d_logscale = delta[:, 7:10]
    can = window.canonical
    quats = can.rotations + d_rot
    norms = np.linalg.norm(quats, axis=1, keepdims=True)
    if np.any(norms < 1e-9):
        raise ModelCorruptError("rotation delta collapsed a quaternion to zero")
    return GaussianSet(
        means=can.means + d_mu,
        rotations=quats / norms,
        scale_logs=can.scale_logs + d_logscale,
        opacity_logits=can.opacity_logits.copy(),
        sh_coeffs=can.sh_coeffs.copy(),
    )


def deform_at_frame(window: WindowModel, frame: int) -> GaussianSet:
    return deform(window, window.frame_time(frame))


@dataclass
class BodyModel:
    """Ordered window models covering a body sequence."""

    windows: list[WindowModel]

    def __post_init__(self) -> None:
        if not self.windows:
            raise InvalidInputError("a body model needs at least one window")
        for j in range(1, len(self.windows)):
            prev_end = self.windows[j - 1].frame_range[1]
            start = self.windows[j].frame_range[0]
            if start != prev_end:
                raise InvalidInputError(
                    f"windows {j - 1} and {j} do not overlap by exactly 1 frame")

    @property
    def n_frames(self) -> int:
        return self.windows[-1].frame_range[1] + 1

    def window_for_frame(self, frame: int) -> WindowModel:
        """The first window containing an absolute frame index."""
        for win in self.windows:
            if win.frame_range[0] <= frame <= win.frame_range[1]:
                return win
        raise InvalidInputError(f"frame {frame} outside the body sequence")

    def frame_set(self, frame: int) -> GaussianSet:
        win = self.window_for_frame(frame)
        return deform_at_frame(win, frame)


# ---------------------------------------------------------------------------
# Bundle (de)serialization: flat named-array dict, windows prefixed w{j}_.

_SPLAT_FIELDS = ("means", "rotations", "scale_logs", "opacity_logits", "sh_coeffs")


def body_to_arrays(body: BodyModel | WindowModel) -> dict[str, np.ndarray]:
    if isinstance(body, WindowModel):
        body = BodyModel(windows=[body])
    arrays: dict[str, np.ndarray] = {
        "n_windows": np.array([len(body.windows)], dtype=np.int64)}
    for j, win in enumerate(body.windows):
        pre = f"w{j}_"
        for name in _SPLAT_FIELDS:
            arrays[pre + name] = getattr(win.canonical, name)
        arrays[pre + "range"] = np.array(win.frame_range, dtype=np.int64)
        arrays[pre + "blend"] = win.blend
        arrays[pre + "bounds"] = win.bounds
        arrays[pre + "resolutions"] = np.array(win.encoder.resolutions,
                                               dtype=np.int64)
        for r_idx, res in enumerate(win.encoder.resolutions):
            for p_idx, plane in enumerate(hexplane.PLANES):
                arrays[f"{pre}enc{res}_{plane}"] = win.encoder.grids[r_idx][p_idx]
        arrays[pre + "n_layers"] = np.array([len(win.mlp.weights)], dtype=np.int64)
        for l, (w, b) in enumerate(zip(win.mlp.weights, win.mlp.biases)):
            arrays[f"{pre}mlp{l}_w"] = w
            arrays[f"{pre}mlp{l}_b"] = b
    return arrays


def _require(arrays: dict[str, np.ndarray], key: str) -> np.ndarray:
    if key not in arrays:
        raise InvalidInputError(f"body chunk is missing array {key!r}")
    return arrays[key]


def body_from_arrays(arrays: dict[str, np.ndarray]) -> BodyModel:
    n_windows = int(_require(arrays, "n_windows")[0])
    windows = []
    for j in range(n_windows):
        pre = f"w{j}_"
        canonical = GaussianSet(**{name: _require(arrays, pre + name)
                                   for name in _SPLAT_FIELDS})
        resolutions = tuple(int(r) for r in _require(arrays, pre + "resolutions"))
        grids = [[_require(arrays, f"{pre}enc{res}_{plane}")
                  for plane in hexplane.PLANES] for res in resolutions]
        feature_dim = grids[0][0].shape[2]
        encoder = hexplane.HexplaneEncoder(resolutions=resolutions,
                                           feature_dim=feature_dim, grids=grids)
        n_layers = int(_require(arrays, pre + "n_layers")[0])
        mlp = deform_mod.TunableMlp(
            weights=[_require(arrays, f"{pre}mlp{l}_w") for l in range(n_layers)],
            biases=[_require(arrays, f"{pre}mlp{l}_b") for l in range(n_layers)],
        )
        rng_range = _require(arrays, pre + "range")
        windows.append(WindowModel(
            canonical=canonical,
            frame_range=(int(rng_range[0]), int(rng_range[1])),
            encoder=encoder,
            mlp=mlp,
            blend=_require(arrays, pre + "blend"),
            bounds=_require(arrays, pre + "bounds"),
        ))
    return BodyModel(windows=windows)
