"""Alice, Bob and Eve assembled from the projection layers.

Topology (``P`` projection, ``D`` dot-product, ``T`` transform, ``P̄``
inverse projection; ``D`` repeats ``depth`` times, default 1)::

    Alice:  x -> P -> D --\\
                          T -> D -> P̄ (x_hat) , P̄ (y) , P̄ (k_hat)
            k -> P -> D --/
    Bob:    y -> P -> D --\\
                          T -> D -> P̄ (x_hat) , P̄ (k_hat)
            k -> P -> D --/
    Eve:    y -> P -> D -> P̄ (x_hat)

Parameter counts with depth 1 (``Nb`` bits, ``Nw`` projection width): each
projection holds ``2*Nw`` values, each dot-product or inverse projection
``2*Nb*Nw``. Hence

* Alice: ``2*(2*Nw) + 3*(2*Nb*Nw) + 3*(2*Nb*Nw) = 4*Nw + 12*Nb*Nw``
* Bob:   ``2*(2*Nw) + 3*(2*Nb*Nw) + 2*(2*Nb*Nw) = 4*Nw + 10*Nb*Nw``
* Eve:   ``2*Nw + 2*Nb*Nw + 2*Nb*Nw            = 2*Nw + 4*Nb*Nw``

and for general depth ``d`` the dot-product term ``3`` becomes ``3*d`` for
Alice/Bob and ``1`` becomes ``d`` for Eve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import ShapeError
from .layers import DotProductLayer, InverseProjectionLayer, ProjectionLayer, transform

PROJECTION_DIMS = (4, 8, 16, 32)


def _dots(n: int, n_bits: int, n_proj: int, rng, dtype, name: str, init_scale=None) -> list[DotProductLayer]:
    return [DotProductLayer(n_bits, n_proj, rng, dtype, name=f"{name}{i}", init_scale=init_scale) for i in range(n)]


class _TwoBranchNet:
    """Shared body of Alice and Bob: two P->D branches merged by T->D."""

    heads: tuple[str, ...] = ()

    def __init__(self, n_bits: int, n_proj: int, rng: np.random.Generator, dtype=np.float32, depth: int = 1,
                 prefix: str = "", init_scale: float | None = None):
        self.n_bits, self.n_proj, self.depth = n_bits, n_proj, depth
        sc = init_scale
        self.in_proj = ProjectionLayer(n_proj, rng, dtype, name=f"{prefix}.in_proj", init_scale=sc)
        self.in_dots = _dots(depth, n_bits, n_proj, rng, dtype, f"{prefix}.in_dot", sc)
        self.key_proj = ProjectionLayer(n_proj, rng, dtype, name=f"{prefix}.key_proj", init_scale=sc)
        self.key_dots = _dots(depth, n_bits, n_proj, rng, dtype, f"{prefix}.key_dot", sc)
        self.post_dots = _dots(depth, n_bits, n_proj, rng, dtype, f"{prefix}.post_dot", sc)
        for h in self.heads:
            setattr(self, f"head_{h}", InverseProjectionLayer(n_bits, n_proj, rng, dtype, name=f"{prefix}.head_{h}",
                                                              init_scale=sc))

    @property
    def key_dot(self) -> DotProductLayer:
        return self.key_dots[0]

    @property
    def post_dot(self) -> DotProductLayer:
        return self.post_dots[0]

    def layers(self) -> list:
        out = [self.in_proj, *self.in_dots, self.key_proj, *self.key_dots, *self.post_dots]
        out.extend(getattr(self, f"head_{h}") for h in self.heads)
        return out

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers() for p in layer.parameters()]

    def _body(self, a: Tensor, k: Tensor) -> Tensor:
        for t in (a, k):
            if t.shape[-1] != self.n_bits:
                raise ShapeError(f"expected inputs of length {self.n_bits}, got shape {t.shape}")
        if a.shape != k.shape:
            raise ShapeError(f"input shapes {a.shape} and {k.shape} differ")
        X = self.in_proj(a)
        for d in self.in_dots:
            X = d(X)
        K = self.key_proj(k)
        for d in self.key_dots:
            K = d(K)
        Y = transform(X, K)
        for d in self.post_dots:
            Y = d(Y)
        return Y


class AliceNet(_TwoBranchNet):
    heads = ("x", "y", "k")

    def __init__(self, n_bits, n_proj, rng, dtype=np.float32, depth=1, init_scale=None):
        super().__init__(n_bits, n_proj, rng, dtype, depth, prefix="alice", init_scale=init_scale)

    @property
    def msg_proj(self) -> ProjectionLayer:
        return self.in_proj

    @property
    def msg_dot(self) -> DotProductLayer:
        return self.in_dots[0]


class BobNet(_TwoBranchNet):
    heads = ("x", "k")

    def __init__(self, n_bits, n_proj, rng, dtype=np.float32, depth=1, init_scale=None):
        super().__init__(n_bits, n_proj, rng, dtype, depth, prefix="bob", init_scale=init_scale)

    @property
    def cipher_proj(self) -> ProjectionLayer:
        return self.in_proj

    @property
    def cipher_dot(self) -> DotProductLayer:
        return self.in_dots[0]


class EveNet:
    def __init__(self, n_bits: int, n_proj: int, rng: np.random.Generator, dtype=np.float32, depth: int = 1,
                 init_scale: float | None = None):
        self.n_bits, self.n_proj, self.depth = n_bits, n_proj, depth
        self.proj = ProjectionLayer(n_proj, rng, dtype, name="eve.proj", init_scale=init_scale)
        self.dots = _dots(depth, n_bits, n_proj, rng, dtype, "eve.dot", init_scale)
        self.inv = InverseProjectionLayer(n_bits, n_proj, rng, dtype, name="eve.inv", init_scale=init_scale)

    @property
    def dot(self) -> DotProductLayer:
        return self.dots[0]

    def layers(self) -> list:
        return [self.proj, *self.dots, self.inv]

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers() for p in layer.parameters()]


def alice_forward(a: AliceNet, x, k) -> tuple[Tensor, Tensor, Tensor]:
    """Encrypt: returns ``(x_hat, y, k_hat)`` in signal form."""
    Y = a._body(ad._as_tensor(x), ad._as_tensor(k))
    return a.head_x(Y), a.head_y(Y), a.head_k(Y)


def bob_forward(b: BobNet, y, k) -> tuple[Tensor, Tensor]:
    """Decrypt: returns ``(x_hat, k_hat)`` in signal form."""
    Y = b._body(ad._as_tensor(y), ad._as_tensor(k))
    return b.head_x(Y), b.head_k(Y)


def eve_forward(e: EveNet, y) -> Tensor:
    y = ad._as_tensor(y)
    if y.shape[-1] != e.n_bits:
        raise ShapeError(f"expected inputs of length {e.n_bits}, got shape {y.shape}")
    X = e.proj(y)
    for d in e.dots:
        X = d(X)
    return e.inv(X)


def count_parameters(params) -> int:
    return int(sum(p.values.size for p in params))


def expected_parameter_counts(n_bits: int, n_proj: int, depth: int = 1) -> dict[str, int]:
    """Closed-form counts documented in the module docstring."""
    proj, layer = 2 * n_proj, 2 * n_bits * n_proj
    return {
        "alice": 2 * proj + 3 * depth * layer + 3 * layer,
        "bob": 2 * proj + 3 * depth * layer + 2 * layer,
        "eve": proj + depth * layer + layer,
    }


@dataclass
class AncModel:
    alice: AliceNet
    bob: BobNet
    eve: EveNet | None
    n_bits: int
    n_proj: int
    seed: int
    depth: int = 1
    converged: bool = False
    training_epochs: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def initialize(cls, n_bits: int = 8, n_proj: int = 8, seed: int = 0, depth: int = 1,
                   dtype=np.float32, init_scale: float | None = None) -> "AncModel":
        """Fresh trio; weights uniform in +-``init_scale`` (default ``layers.INIT_SCALE``)."""
        rng = np.random.default_rng(seed)
        alice = AliceNet(n_bits, n_proj, rng, dtype, depth, init_scale)
        bob = BobNet(n_bits, n_proj, rng, dtype, depth, init_scale)
        eve = EveNet(n_bits, n_proj, rng, dtype, depth, init_scale)
        return cls(alice, bob, eve, n_bits, n_proj, seed, depth)

    def parameters(self) -> list[Parameter]:
        params = self.alice.parameters() + self.bob.parameters()
        if self.eve is not None:
            params += self.eve.parameters()
        return params

    def parameter_counts(self) -> dict[str, int]:
        counts = {"alice": count_parameters(self.alice.parameters()),
                  "bob": count_parameters(self.bob.parameters())}
        if self.eve is not None:
            counts["eve"] = count_parameters(self.eve.parameters())
        return counts

    def astype(self, dtype) -> "AncModel":
        """Copy with every parameter cast to ``dtype`` (moments reset)."""
        clone = AncModel.initialize(self.n_bits, self.n_proj, self.seed, self.depth, dtype)
        if self.eve is None:
            clone.eve = None
        for dst, src in zip(clone.parameters(), self.parameters()):
            dst.values[...] = src.values.astype(dtype)
        clone.converged, clone.training_epochs = self.converged, self.training_epochs
        clone.meta = dict(self.meta)
        return clone
