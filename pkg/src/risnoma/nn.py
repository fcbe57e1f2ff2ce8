"""Network blocks on top of the tape: dense layers, a GRU cell,
permutation-invariant aggregation, and the hypernetwork value mixer."""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor

_ACTS = {"linear": lambda x: x, "tanh": ad.tanh, "relu": ad.relu,
         "elu": ad.elu, "sigmoid": ad.sigmoid}


def dense(store: ParamStore, name: str, x, in_dim: int, out_dim: int,
          activation: str = "linear") -> Tensor:
    x = ad.as_tensor(x)
    w = store.param(f"{name}.w", (in_dim, out_dim))
    b = store.param(f"{name}.b", (out_dim,), kind="zeros")
    return _ACTS[activation](x @ w + b)


def gru_step(store: ParamStore, name: str, x, h, in_dim: int,
             hidden: int) -> Tensor:
    """h' = (1 - z) * h + z * candidate; z -> 0 freezes the carried state."""
    x, h = ad.as_tensor(x), ad.as_tensor(h)
    z = ad.sigmoid(dense(store, f"{name}.zx", x, in_dim, hidden)
                   + dense(store, f"{name}.zh", h, hidden, hidden))
    r = ad.sigmoid(dense(store, f"{name}.rx", x, in_dim, hidden)
                   + dense(store, f"{name}.rh", h, hidden, hidden))
    cand = ad.tanh(dense(store, f"{name}.cx", x, in_dim, hidden)
                   + r * dense(store, f"{name}.ch", h, hidden, hidden))
    one = Tensor(np.ones(hidden))
    return (one - z) * h + z * cand


def aggregate(kind: str, items, dim: int) -> Tensor:
    """Reduce a set of equal-length vectors; the empty set gives zeros.

    Items are folded in lexicographic order of their values, so any
    permutation of the input set produces a bitwise-identical result.
    """
    items = list(items)
    if not items:
        return Tensor(np.zeros(dim))
    items = [ad.as_tensor(t) for t in items]
    stacked = np.stack([t.value for t in items])
    order = np.lexsort(stacked.T[::-1])
    folded = items[order[0]]
    if kind == "max":
        for idx in order[1:]:
            folded = ad.maximum(folded, items[idx])
        return folded
    for idx in order[1:]:
        folded = folded + items[idx]
    if kind == "mean":
        folded = folded / float(len(items))
    elif kind != "sum":
        raise ValueError(f"unknown aggregation kind: {kind}")
    return folded


def hyper_mixing(store: ParamStore, prefix: str, state, values,
                 state_dim: int, hidden: int) -> Tensor:
    """Monotone two-layer mix of local values with state-generated weights.

    Both weight layers pass through |.| so every path from a local value to
    the output has a non-negative slope; biases are unconstrained and the
    final bias is itself a small network of the state.
    """
    state = ad.as_tensor(state)
    v = ad.concat([ad.as_tensor(x).reshape(1) for x in values])
    n = v.value.size
    w1 = ad.absolute(dense(store, f"{prefix}.hw1", state, state_dim,
                           n * hidden)).reshape(n, hidden)
    b1 = dense(store, f"{prefix}.hb1", state, state_dim, hidden)
    mixed = ad.elu(v @ w1 + b1)
    w2 = ad.absolute(dense(store, f"{prefix}.hw2", state, state_dim, hidden))
    b2 = dense(store, f"{prefix}.hb2a", state, state_dim, hidden,
               activation="relu")
    b2 = dense(store, f"{prefix}.hb2b", b2, hidden, 1)
    return (mixed @ w2.reshape(hidden, 1) + b2)[0]


def mlp(store: ParamStore, name: str, x, dims, activation: str = "tanh",
        final: str = "linear") -> Tensor:
    out = ad.as_tensor(x)
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        act = final if i == len(dims) - 2 else activation
        out = dense(store, f"{name}.l{i}", out, a, b, activation=act)
    return out
