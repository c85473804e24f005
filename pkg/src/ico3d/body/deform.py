"""Tunable deformation MLP: M blendable weight sets per layer.

One layer computes y = psi(sum_m alpha_m (w_m^T x + b_m)) with a per-sample
blend vector alpha over the M motion modes. Hidden layers use LeakyReLU, the
final layer is linear. The network maps spatio-temporal features to the
10-dim delta (d_mu 3, d_rot 4, d_logscale 3); a zero final layer therefore
deforms nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError, ModelCorruptError

M_MODES = 4
HIDDEN = 64
OUT_DIM = 10  # d_mu (3) + d_rot (4) + d_logscale (3)
LEAKY_SLOPE = 0.01
_ALPHA_TOL = 1e-6


def _check_alpha(alpha: np.ndarray, n: int, modes: int) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.ndim == 1:
        alpha = np.broadcast_to(alpha, (n, alpha.shape[0]))
    if alpha.shape != (n, modes):
        raise InvalidInputError(
            f"alpha must have shape ({n}, {modes}), got {alpha.shape}")
    if not np.isfinite(alpha).all():
        raise InvalidInputError("alpha contains NaN/Inf")
    if n and np.abs(alpha.sum(axis=1) - 1.0).max() > _ALPHA_TOL:
        raise InvalidInputError("alpha rows must sum to 1")
    return alpha


def tunable_layer(x: np.ndarray, alpha: np.ndarray, weights: np.ndarray,
                  biases: np.ndarray, activate: bool = True) -> np.ndarray:
    """y = psi(sum_m alpha_m (x w_m + b_m)) for a batch.

    x: (n, d_in); alpha: (n, M) or (M,) broadcast; weights: (M, d_in, d_out);
    biases: (M, d_out). psi is LeakyReLU when `activate` else identity.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64)
    biases = np.asarray(biases, dtype=np.float64)
    if weights.ndim != 3 or biases.shape != weights.shape[::2]:
        raise InvalidInputError("weights must be (M, d_in, d_out), biases (M, d_out)")
    if x.shape[1] != weights.shape[1]:
        raise InvalidInputError(
            f"input dim {x.shape[1]} does not match weights {weights.shape}")
    alpha = _check_alpha(alpha, x.shape[0], weights.shape[0])
    per_mode = np.einsum("ni,mio->nmo", x, weights) + biases[None, :, :]
    pre = np.einsum("nm,nmo->no", alpha, per_mode)
    if activate:
        return np.where(pre >= 0, pre, LEAKY_SLOPE * pre)
    return pre


@dataclass
class TunableMlp:
    """Stacked tunable layers; weights[l]: (M, d_in, d_out), biases[l]: (M, d_out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self) -> None:
        if not self.weights or len(self.weights) != len(self.biases):
            raise InvalidInputError("need matching weight/bias lists")
        modes = None
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.ascontiguousarray(w, dtype=np.float64)
            b = np.ascontiguousarray(b, dtype=np.float64)
            if w.ndim != 3 or b.shape != w.shape[::2]:
                raise InvalidInputError(f"layer {l} shapes are inconsistent")
            if modes is None:
                modes = w.shape[0]
            elif w.shape[0] != modes:
                raise InvalidInputError("all layers must share the mode count M")
            if l and w.shape[1] != self.weights[l - 1].shape[2]:
                raise InvalidInputError(f"layer {l} input dim mismatch")
            self.weights[l] = w
            self.biases[l] = b

    @property
    def modes(self) -> int:
        return self.weights[0].shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[2]

    def check_finite(self) -> None:
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ModelCorruptError(f"non-finite values in MLP layer {l}")

    def copy(self) -> "TunableMlp":
        return TunableMlp(weights=[w.copy() for w in self.weights],
                          biases=[b.copy() for b in self.biases])


def new_mlp(rng: np.random.Generator, in_dim: int, hidden: int = HIDDEN,
            out_dim: int = OUT_DIM, modes: int = M_MODES) -> TunableMlp:
    """He-uniform hidden layer, zero final layer (identity deformation)."""
    bound = np.sqrt(6.0 / in_dim)
    return TunableMlp(
        weights=[rng.uniform(-bound, bound, size=(modes, in_dim, hidden)),
                 np.zeros((modes, hidden, out_dim))],
        biases=[np.zeros((modes, hidden)), np.zeros((modes, out_dim))],
    )


def mlp_forward(mlp: TunableMlp, x: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Apply every layer; LeakyReLU between layers, final layer linear."""
    mlp.check_finite()
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    last = len(mlp.weights) - 1
    for l, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        h = tunable_layer(h, alpha, w, b, activate=(l != last))
    return h


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)
