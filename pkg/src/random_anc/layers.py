"""Projection, dot-product, inverse projection and transform layers.

Shapes, with an optional leading batch axis ``B``:

* projection:          ``(B, Nb)       -> (B, Nb, Nw)``, ``X[i, j] = x[i] * w[j] + b[j]``
* dot-product:         ``(B, Nb, Nw)   -> (B, Nb, Nw)``, ``X * W + B`` (Hadamard)
* transform:           ``(B, Nb, Nw)^2 -> (B, Nb, Nw)``, ``Xd * Kd`` (no parameters)
* inverse projection:  ``(B, Nb, Nw)   -> (B, Nb)``, ``y[i] = sum_j X[i, j] * W[i, j] + B[i, j]``

Every layer applies tanh to its output, the transform included. Pass
``activate=False`` to get the pre-activation value.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import NumericError, ShapeError

# Weights start uniform in [-INIT_SCALE, INIT_SCALE]; biases start at zero.
INIT_SCALE = 2.0


def _uniform(rng: np.random.Generator, shape, dtype, scale: float | None) -> np.ndarray:
    scale = INIT_SCALE if scale is None else scale
    if not scale > 0:
        raise ValueError(f"init scale must be positive, got {scale}")
    return rng.uniform(-scale, scale, size=shape).astype(dtype)


class ProjectionLayer:
    def __init__(self, n_proj: int, rng: np.random.Generator | None = None, dtype=np.float32, name: str = "proj",
                 init_scale: float | None = None):
        rng = rng if rng is not None else np.random.default_rng()
        self.w_p = Parameter(_uniform(rng, (n_proj,), dtype, init_scale), name=f"{name}.w_p")
        self.b_p = Parameter(np.zeros(n_proj, dtype=dtype), name=f"{name}.b_p")

    @property
    def n_proj(self) -> int:
        return self.w_p.shape[0]

    def parameters(self) -> list[Parameter]:
        return [self.w_p, self.b_p]

    def __call__(self, x: Tensor, activate: bool = True) -> Tensor:
        return project(self, x, activate)


class DotProductLayer:
    def __init__(self, n_bits: int, n_proj: int, rng: np.random.Generator | None = None, dtype=np.float32,
                 name: str = "dot", init_scale: float | None = None):
        rng = rng if rng is not None else np.random.default_rng()
        self.W_d = Parameter(_uniform(rng, (n_bits, n_proj), dtype, init_scale), name=f"{name}.W_d")
        self.B_d = Parameter(np.zeros((n_bits, n_proj), dtype=dtype), name=f"{name}.B_d")

    def parameters(self) -> list[Parameter]:
        return [self.W_d, self.B_d]

    def __call__(self, X: Tensor, activate: bool = True) -> Tensor:
        return dot_product(self, X, activate)


class InverseProjectionLayer:
    def __init__(self, n_bits: int, n_proj: int, rng: np.random.Generator | None = None, dtype=np.float32,
                 name: str = "inv", init_scale: float | None = None):
        rng = rng if rng is not None else np.random.default_rng()
        self.W_ip = Parameter(_uniform(rng, (n_bits, n_proj), dtype, init_scale), name=f"{name}.W_ip")
        self.B_ip = Parameter(np.zeros((n_bits, n_proj), dtype=dtype), name=f"{name}.B_ip")

    def parameters(self) -> list[Parameter]:
        return [self.W_ip, self.B_ip]

    def __call__(self, X: Tensor, activate: bool = True) -> Tensor:
        return inverse_project(self, X, activate)


def _check_trailing(X: Tensor, shape: tuple[int, ...], what: str) -> None:
    if X.shape[-len(shape):] != shape or X.values.ndim < len(shape):
        raise ShapeError(f"{what}: input shape {X.shape} does not end in {shape}")


def project(layer: ProjectionLayer, x: Tensor, activate: bool = True) -> Tensor:
    x = ad._as_tensor(x)
    if x.values.ndim < 1:
        raise ShapeError(f"projection: input shape {x.shape} is not a vector")
    out = ad.project_outer(x, layer.w_p, layer.b_p)
    return ad.tanh(out) if activate else out


def dot_product(layer: DotProductLayer, X: Tensor, activate: bool = True) -> Tensor:
    X = ad._as_tensor(X)
    _check_trailing(X, layer.W_d.shape, "dot-product")
    if activate:
        return ad.affine_tanh(X, layer.W_d, layer.B_d)
    return ad.add(ad.mul(X, layer.W_d), layer.B_d)


def inverse_project(layer: InverseProjectionLayer, X: Tensor, activate: bool = True) -> Tensor:
    X = ad._as_tensor(X)
    _check_trailing(X, layer.W_ip.shape, "inverse projection")
    # The bias sums across the row too, so it folds into a per-row constant.
    out = ad.add(ad.sum_rows(ad.mul(X, layer.W_ip)), ad.sum_rows(layer.B_ip))
    return ad.tanh(out) if activate else out


def transform(Xd: Tensor, Kd: Tensor, activate: bool = True) -> Tensor:
    Xd, Kd = ad._as_tensor(Xd), ad._as_tensor(Kd)
    if Xd.shape != Kd.shape:
        raise ShapeError(f"transform: shapes {Xd.shape} and {Kd.shape} differ")
    out = ad.mul(Xd, Kd)
    return ad.tanh(out) if activate else out


# --- signal / bit codec -----------------------------------------------------


def bits_to_signal(bits, dtype=np.float32) -> np.ndarray:
    """Map bit 0 -> -1 and bit 1 -> +1."""
    b = np.asarray(bits)
    return (2 * b.astype(dtype) - 1).astype(dtype)


def signal_to_bits(y) -> np.ndarray:
    """Round ``(y + 1) / 2`` to {0, 1}; a signal of exactly 0 becomes bit 1."""
    y = np.asarray(y.values if isinstance(y, Tensor) else y)
    if not np.all(np.isfinite(y)):
        raise NumericError("signal contains non-finite entries")
    return (y >= 0).astype(np.uint8)


def round_signal(y) -> np.ndarray:
    """Nearest point of {-1, +1}; the rounded ciphertext in signal form."""
    return bits_to_signal(signal_to_bits(y), dtype=np.asarray(y.values if isinstance(y, Tensor) else y).dtype)
