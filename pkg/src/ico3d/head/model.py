"""Expression-conditioned per-Gaussian color and opacity.

Each Gaussian owns a latent basis F (B x f) and bias f0; an expression
vector e blends them into a feature f_i = F_i^T e + f0_i. A small shared
MLP maps (f_i, positional encoding of the mean) to RGB and opacity, both
squashed by sigmoids so outputs stay in [0,1] for any finite weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.gaussians import GaussianSet
from ..errors import DivergenceError, InvalidInputError, ModelCorruptError

N_AUDIO = 32
N_EYE = 7
DEFAULT_CHANNELS = N_AUDIO + N_EYE
DEFAULT_LATENT = 32
HIDDEN = 64
DEFAULT_PE_LEVELS = 10
LEAKY_SLOPE = 0.01
PARAM_NAMES = ("basis", "bias", "w1", "b1", "w2", "b2")


def positional_encoding(mu: np.ndarray, levels: int) -> np.ndarray:
    """gamma(mu): per level l the six entries
    [sin(2^l pi mu_x), sin_y, sin_z, cos_x, cos_y, cos_z], levels stacked in
    ascending l. Accepts a single 3-vector or an (n, 3) batch."""
    mu = np.asarray(mu, dtype=np.float64)
    if not np.isfinite(mu).all():
        raise InvalidInputError("positional encoding input must be finite")
    single = mu.ndim == 1
    pts = np.atleast_2d(mu)
    if pts.shape[1] != 3:
        raise InvalidInputError(f"expected 3-vectors, got shape {mu.shape}")
    if levels == 0:
        out = np.zeros((pts.shape[0], 0))
        return out[0] if single else out
    ang = pts[:, None, :] * ((2.0 ** np.arange(levels)) * np.pi)[None, :, None]
    out = np.concatenate([np.sin(ang), np.cos(ang)], axis=2)
    out = out.reshape(pts.shape[0], 6 * levels)
    return out[0] if single else out


@dataclass
class HeadModel:
    basis: np.ndarray   # (N, B, f) per-Gaussian expression basis F
    bias: np.ndarray    # (N, f) feature bias f0
    w1: np.ndarray      # (f + 6*pe_levels, HIDDEN)
    b1: np.ndarray      # (HIDDEN,)
    w2: np.ndarray      # (HIDDEN, 4) columns: RGB then opacity
    b2: np.ndarray      # (4,)
    pe_levels: int = DEFAULT_PE_LEVELS

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.ascontiguousarray(getattr(self, name),
                                                     dtype=np.float64))
        n, b, f = self.basis.shape
        if self.bias.shape != (n, f):
            raise InvalidInputError("bias shape does not match basis")
        d_in = f + 6 * self.pe_levels
        if self.w1.shape[0] != d_in:
            raise InvalidInputError(
                f"w1 expects input dim {self.w1.shape[0]}, model provides {d_in}")
        hidden = self.w1.shape[1]
        if (self.b1.shape != (hidden,) or self.w2.shape != (hidden, 4)
                or self.b2.shape != (4,)):
            raise InvalidInputError("MLP layer shapes are inconsistent")

    @property
    def count(self) -> int:
        return self.basis.shape[0]

    @property
    def n_channels(self) -> int:
        return self.basis.shape[1]

    @property
    def latent_dim(self) -> int:
        return self.basis.shape[2]

    def check_finite(self) -> None:
        for name in PARAM_NAMES:
            if not np.isfinite(getattr(self, name)).all():
                raise ModelCorruptError(f"non-finite values in head {name}")

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "HeadModel":
        return HeadModel(**{k: v.copy() for k, v in self.params().items()},
                         pe_levels=self.pe_levels)


def new_head_model(rng: np.random.Generator, count: int,
                   n_channels: int = DEFAULT_CHANNELS,
                   latent_dim: int = DEFAULT_LATENT,
                   pe_levels: int = DEFAULT_PE_LEVELS,
                   hidden: int = HIDDEN) -> HeadModel:
    """Fresh model: zero basis and bias (iteration-0 output is expression
    independent), He-style uniform fan-in init for the MLP."""
    d_in = latent_dim + 6 * pe_levels

    def he(shape):
        bound = np.sqrt(6.0 / shape[0])
        return rng.uniform(-bound, bound, size=shape)

    return HeadModel(
        basis=np.zeros((count, n_channels, latent_dim)),
        bias=np.zeros((count, latent_dim)),
        w1=he((d_in, hidden)),
        b1=np.zeros(hidden),
        w2=he((hidden, 4)),
        b2=np.zeros(4),
        pe_levels=pe_levels,
    )


def _check_expression(model: HeadModel, e: np.ndarray) -> np.ndarray:
    e = np.asarray(e, dtype=np.float64).reshape(-1)
    if e.shape != (model.n_channels,):
        raise InvalidInputError(
            f"expression has dim {e.shape[0]}, model expects {model.n_channels}")
    if not np.isfinite(e).all():
        raise InvalidInputError("expression vector must be finite")
    return e


def blend_features(model: HeadModel, e: np.ndarray) -> np.ndarray:
    """f_i = F_i^T e + f0_i for every Gaussian; exactly linear in e."""
    e = _check_expression(model, e)
    return np.einsum("nbf,b->nf", model.basis, e) + model.bias


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_cached(model: HeadModel, e: np.ndarray, means: np.ndarray):
    means = np.asarray(means, dtype=np.float64)
    if means.shape != (model.count, 3):
        raise InvalidInputError("means count does not match the head model")
    model.check_finite()
    x = np.concatenate([blend_features(model, e),
                        positional_encoding(means, model.pe_levels)], axis=1)
    z1 = x @ model.w1 + model.b1
    h = np.where(z1 > 0, z1, LEAKY_SLOPE * z1)
    z2 = h @ model.w2 + model.b2
    out = _sigmoid(z2)
    return x, z1, h, out


def head_forward(model: HeadModel, e: np.ndarray,
                 means: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-Gaussian (RGB (N,3), opacity (N,)), each in [0,1]."""
    _, _, _, out = _forward_cached(model, e, means)
    return out[:, :3], out[:, 3]


@dataclass
class HeadGrads:
    loss: float
    basis: np.ndarray
    bias: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}


def _backward_from_dout(model: HeadModel, e: np.ndarray, cache,
                        d_out: np.ndarray, loss: float) -> HeadGrads:
    """Chain d loss / d out back to every parameter. d_out is (N, 4)."""
    x, z1, h, out = cache
    dz2 = d_out * out * (1.0 - out)
    gw2 = h.T @ dz2
    gb2 = dz2.sum(axis=0)
    dh = dz2 @ model.w2.T
    dz1 = dh * np.where(z1 > 0, 1.0, LEAKY_SLOPE)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    dx = dz1 @ model.w1.T
    dfeat = dx[:, :model.latent_dim]
    gbasis = e[None, :, None] * dfeat[:, None, :]
    return HeadGrads(loss=loss, basis=gbasis, bias=dfeat.copy(),
                     w1=gw1, b1=gb1, w2=gw2, b2=gb2)


def head_backward(model: HeadModel, e: np.ndarray, means: np.ndarray,
                  target_rgb: np.ndarray, target_opacity: np.ndarray,
                  lambda_l1: float = 0.8,
                  lambda_sq: float = 0.2) -> HeadGrads:
    """Gradients of the feature-level loss lambda_l1 * L1 + lambda_sq * MSE
    over the stacked (RGB, opacity) outputs. sign(0) is taken as 0."""
    e = _check_expression(model, e)
    cache = _forward_cached(model, e, means)
    out = cache[3]
    tgt = np.concatenate([np.asarray(target_rgb, dtype=np.float64),
                          np.asarray(target_opacity, dtype=np.float64)
                          .reshape(-1, 1)], axis=1)
    if tgt.shape != out.shape:
        raise InvalidInputError("target shapes do not match model outputs")
    r = out - tgt
    n_terms = r.size
    loss = float(lambda_l1 * np.abs(r).mean() + lambda_sq * (r ** 2).mean())
    d_out = (lambda_l1 * np.sign(r) + lambda_sq * 2.0 * r) / n_terms
    return _backward_from_dout(model, e, cache, d_out, loss)


@dataclass
class HeadFitConfig:
    """Learning rates follow the published schedule (MLP 1.6e-4, basis
    2.5e-3, bias 5e-3); optimizer is Adam by default with plain SGD plus
    exponential decay available."""
    lr_mlp: float = 1.6e-4
    lr_basis: float = 2.5e-3
    lr_bias: float = 5e-3
    lambda_l1: float = 0.8
    lambda_ssim: float = 0.2
    optimizer: str = "adam"
    sgd_decay: float = 0.999

    def lr_of(self, name: str) -> float:
        if name == "basis":
            return self.lr_basis
        if name == "bias":
            return self.lr_bias
        return self.lr_mlp


class _Adam:
    def __init__(self, params: dict[str, np.ndarray]):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr_of):
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        for k, p in params.items():
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mhat = self.m[k] / (1 - b1 ** self.t)
            vhat = self.v[k] / (1 - b2 ** self.t)
            p -= lr_of(k) * mhat / (np.sqrt(vhat) + eps)


class _Sgd:
    def __init__(self, decay: float):
        self.decay = decay
        self.t = 0

    def step(self, params, grads, lr_of):
        scale = self.decay ** self.t
        self.t += 1
        for k, p in params.items():
            p -= lr_of(k) * scale * grads[k]


def _render_entry_grads(model, splats, e, cam, target, cfg):
    from ..render.backward import oracle_backward
    from ..render.metrics import l1 as l1_metric
    from ..render.metrics import ssim_with_grad
    from ..render.rasterizer import render_oracle

    e = _check_expression(model, e)
    cache = _forward_cached(model, e, splats.means)
    out = cache[3]
    rgb_o = np.ascontiguousarray(out[:, :3])
    op_o = np.ascontiguousarray(out[:, 3])
    frame = render_oracle(splats, cam, color_override=rgb_o,
                          opacity_override=op_o)
    img = frame.rgb
    l1_val = l1_metric(img, target)
    ssim_val, ssim_grad = ssim_with_grad(img, target)
    loss = cfg.lambda_l1 * l1_val + cfg.lambda_ssim * (1.0 - ssim_val)
    g_img = (cfg.lambda_l1 * np.sign(img - target) / img.size
             - cfg.lambda_ssim * ssim_grad)
    rg = oracle_backward(splats, cam, grad_image=g_img,
                         color_override=rgb_o, opacity_override=op_o)
    d_out = np.concatenate([rg.color, rg.opacity[:, None]], axis=1)
    grads = _backward_from_dout(model, e, cache, d_out, loss)
    return grads, loss, l1_val


def fit_head(model: HeadModel, splats, dataset: list, iters: int,
             config: HeadFitConfig | None = None):
    """Fit all head parameters.

    Feature-level entries are (e, target_rgb (N,3), target_opacity (N,));
    render-level entries are (e, CameraModel, target image), requiring
    `splats` to be a GaussianSet. Returns (model, per-iteration loss trace);
    the input model is left untouched.
    """
    from ..core.camera import CameraModel

    cfg = config or HeadFitConfig()
    if not dataset:
        raise InvalidInputError("fit_head needs a nonempty dataset")
    render_mode = isinstance(dataset[0][1], CameraModel)
    if render_mode and not isinstance(splats, GaussianSet):
        raise InvalidInputError("render-level fitting needs a GaussianSet")
    means = splats.means if isinstance(splats, GaussianSet) else np.asarray(splats)

    model = model.copy()
    params = model.params()
    opt = _Adam(params) if cfg.optimizer == "adam" else _Sgd(cfg.sgd_decay)
    trace: list[float] = []
    for it in range(iters):
        total = {k: np.zeros_like(v) for k, v in params.items()}
        loss_sum = 0.0
        for entry in dataset:
            if render_mode:
                e, cam, target = entry
                grads, loss, _ = _render_entry_grads(model, splats, e, cam,
                                                     target, cfg)
            else:
                e, t_rgb, t_op = entry
                grads = head_backward(model, e, means, t_rgb, t_op,
                                      lambda_l1=cfg.lambda_l1,
                                      lambda_sq=cfg.lambda_ssim)
                loss = grads.loss
            loss_sum += loss
            for k in total:
                total[k] += grads.params()[k]
        mean_loss = loss_sum / len(dataset)
        if not np.isfinite(mean_loss):
            raise DivergenceError(f"loss became non-finite at iteration {it}")
        trace.append(mean_loss)
        for k in total:
            total[k] /= len(dataset)
        opt.step(params, total, cfg.lr_of)
    return model, trace


def head_to_arrays(model: HeadModel) -> dict[str, np.ndarray]:
    arrays = {name: getattr(model, name) for name in PARAM_NAMES}
    arrays["pe_levels"] = np.array([model.pe_levels], dtype=np.int64)
    return arrays


def head_from_arrays(arrays: dict[str, np.ndarray]) -> HeadModel:
    missing = [k for k in (*PARAM_NAMES, "pe_levels") if k not in arrays]
    if missing:
        raise InvalidInputError(f"head chunk is missing arrays: {missing}")
    return HeadModel(**{name: arrays[name] for name in PARAM_NAMES},
                     pe_levels=int(arrays["pe_levels"][0]))
