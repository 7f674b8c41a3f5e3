"""The central mechanism: pairwise scoring, soft adjacency, gated updates.

One layer scores every ordered token pair (i, k) from the current node
states plus static node/edge attributes, normalizes each target's incoming
scores into a distribution over sources, aggregates source states under
that distribution, and blends the aggregate into the node through a
sigmoid gate computed from the current state. Layers stack without
parameter sharing; node and edge attributes are computed once and reused.

Orientation conventions, fixed throughout: score matrix entry s[i][k] is
source i, target k; normalization runs down each column (over sources);
weight matrices are consumed as right operands of row-major matmuls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

ALPHA_COLUMN_TOL = 1e-9


@dataclass
class Cn3LayerParams:
    """One layer's weights: pair scorer and update gate."""

    w_score: Tensor  # [d_cat, d_a] where d_cat = 2*d_h + 2*d_v + d_e
    u: Tensor        # [d_a]
    w_gate: Tensor   # [d_h, d_h]
    b_gate: Tensor   # [d_h]


@dataclass
class Cn3StackParams:
    """A stack of layers plus an optional input projection to d_h."""

    layers: list[Cn3LayerParams]
    input_proj: Tensor | None = None  # [d_h0, d_h], used once before layer 1

    @property
    def depth(self) -> int:
        return len(self.layers)


@dataclass
class AlphaTrace:
    """Per-layer attention matrices for a sentence, plus its surface tokens."""

    tokens: list[str]
    per_layer: list[Tensor]

    def column_sums_ok(self, tol: float = ALPHA_COLUMN_TOL) -> bool:
        n = len(self.tokens)
        for alpha in self.per_layer:
            sums = alpha.data.sum(axis=0)
            if alpha.data.shape != (n, n) or np.any(np.abs(sums - 1.0) > tol):
                return False
        return True


def init_layer(d_h: int, d_v: int, d_e: int, d_a: int,
               rng: np.random.Generator) -> Cn3LayerParams:
    d_cat = 2 * d_h + 2 * d_v + d_e
    return Cn3LayerParams(
        w_score=ad.uniform((d_cat, d_a), -0.1, 0.1, rng),
        u=ad.uniform((d_a,), -0.1, 0.1, rng),
        w_gate=ad.uniform((d_h, d_h), -0.1, 0.1, rng),
        b_gate=ad.zeros((d_h,), requires_grad=True),
    )


def init_stack(d_h0: int, d_h: int, d_v: int, d_e: int, d_a: int, depth: int,
               rng: np.random.Generator) -> Cn3StackParams:
    proj = None
    if d_h0 != d_h:
        proj = ad.uniform((d_h0, d_h), -0.1, 0.1, rng)
    layers = [init_layer(d_h, d_v, d_e, d_a, rng) for _ in range(depth)]
    return Cn3StackParams(layers=layers, input_proj=proj)


def edge_scores(h: Tensor, v: Tensor | None, e: Tensor,
                p: Cn3LayerParams) -> Tensor:
    """Score every ordered pair: s[i][k] = u . tanh([h_k, h_i, v_i, v_k, e_ik] @ W).

    e holds one row per ordered pair in row-major order, pair (i, k) at
    row i*n + k. A None v stands for a zero-width attribute block and is
    simply left out of the concatenation.
    """
    n = h.shape[0]
    if v is not None and v.shape[0] != n:
        raise ad.ShapeError(f"v has {v.shape[0]} rows for {n} tokens")
    if e.shape[0] != n * n:
        raise ad.ShapeError(f"e has {e.shape[0]} rows, expected {n * n}")
    src = np.repeat(np.arange(n), n)  # i of pair row i*n + k
    tgt = np.tile(np.arange(n), n)    # k of pair row i*n + k
    blocks = [ad.gather_rows(h, tgt), ad.gather_rows(h, src)]
    if v is not None:
        blocks.append(ad.gather_rows(v, src))
        blocks.append(ad.gather_rows(v, tgt))
    blocks.append(e)
    cat = ad.concat_cols(blocks)                       # [n*n, d_cat]
    hidden = ad.tanh(ad.matmul(cat, p.w_score))        # [n*n, d_a]
    flat = ad.matmul(hidden, ad.reshape(p.u, (p.u.shape[0], 1)))
    return ad.reshape(flat, (n, n))


def normalize_alpha(s: Tensor) -> Tensor:
    """Column-wise softmax: alpha[:, k] distributes target k's attention over sources."""
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ad.ShapeError(f"score matrix must be square, got {s.shape}")
    return ad.transpose(ad.row_softmax(ad.transpose(s)))


def aggregate(alpha: Tensor, h: Tensor) -> Tensor:
    """Row k of the result is sum_i alpha[i][k] * h[i]."""
    if alpha.shape != (h.shape[0], h.shape[0]):
        raise ad.ShapeError(f"alpha {alpha.shape} does not match h {h.shape}")
    return ad.matmul(ad.transpose(alpha), h)


def gated_update(h: Tensor, h_agg: Tensor, p: Cn3LayerParams) -> Tensor:
    """Blend: g = sigmoid(h @ W_gate + b_gate), out = g*h_agg + (1-g)*h.

    The gate reads the current state h, not the aggregate.
    """
    if h.shape != h_agg.shape:
        raise ad.ShapeError(f"state {h.shape} and aggregate {h_agg.shape} differ")
    g = ad.sigmoid(ad.matmul(h, p.w_gate) + p.b_gate)
    one_minus_g = Tensor(np.ones(g.shape)) - g
    return g * h_agg + one_minus_g * h


def run_stack(h0: Tensor, v: Tensor | None, e: Tensor, stack: Cn3StackParams,
              tokens: list[str] | None = None) -> tuple[Tensor, AlphaTrace]:
    """Project h0 if configured, then apply every layer; collect each alpha.

    A zero-layer stack is allowed and returns the (projected) input with an
    empty trace; ablations use it as the no-message-passing baseline.
    """
    h = h0 if stack.input_proj is None else ad.matmul(h0, stack.input_proj)
    alphas: list[Tensor] = []
    for layer in stack.layers:
        s = edge_scores(h, v, e, layer)
        alpha = normalize_alpha(s)
        h = gated_update(h, aggregate(alpha, h), layer)
        alphas.append(alpha)
    if tokens is None:
        tokens = [str(i) for i in range(h0.shape[0])]
    return h, AlphaTrace(tokens=tokens, per_layer=alphas)


def layer_param_list(stack: Cn3StackParams) -> list[Tensor]:
    """All trainable tensors in the stack, in a stable order."""
    out: list[Tensor] = []
    if stack.input_proj is not None:
        out.append(stack.input_proj)
    for layer in stack.layers:
        out.extend([layer.w_score, layer.u, layer.w_gate, layer.b_gate])
    return out
