"""Parameter storage and the forward layers used by the models.

Initialization is uniform fan-in scaled (+-sqrt(1/fan_in)) for weights and
zero for biases, drawn from the store's seeded generator in creation order,
so a (seed, architecture) pair always yields identical parameters.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .tensor import MASK_BIAS, Tensor, concat, default_dtype


class ParameterStore:
    """Named trainable tensors plus their gradient buffers."""

    def __init__(self, seed: int):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, shape: tuple, init: str = "fanin_uniform") -> Tensor:
        if name in self._params:
            raise ConfigurationError(f"duplicate parameter name {name!r}")
        if init == "zeros":
            data = np.zeros(shape, dtype=default_dtype())
        elif init == "fanin_uniform":
            fan_in = shape[0] if len(shape) > 1 else shape[0]
            bound = float(np.sqrt(1.0 / fan_in))
            data = self.rng.uniform(-bound, bound, size=shape).astype(default_dtype())
        else:
            raise ConfigurationError(f"unknown init {init!r}")
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self._params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, t in self._params.items():
            if name not in arrays:
                raise ConfigurationError(f"checkpoint missing parameter {name!r}")
            if arrays[name].shape != t.data.shape:
                raise ConfigurationError(
                    f"shape mismatch for {name!r}: checkpoint {arrays[name].shape}, model {t.data.shape}"
                )
            t.data = arrays[name].astype(t.data.dtype, copy=True)

    def copy_from(self, other: "ParameterStore") -> None:
        self.load_state_arrays(other.state_arrays())


class Affine:
    """Dense layer y = x @ W + b."""

    def __init__(self, store: ParameterStore, name: str, d_in: int, d_out: int):
        self.d_in = d_in
        self.d_out = d_out
        self.weight = store.add(f"{name}.weight", (d_in, d_out))
        self.bias = store.add(f"{name}.bias", (d_out,), init="zeros")

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.d_in:
            raise ConfigurationError(
                f"affine input width {x.shape[-1]} does not match layer width {self.d_in}"
            )
        return x @ self.weight + self.bias


class MLP:
    """Stack of affine layers with tanh between them and a linear head."""

    def __init__(self, store: ParameterStore, name: str, dims: list[int]):
        if len(dims) < 2:
            raise ConfigurationError("MLP needs at least input and output widths")
        self.layers = [
            Affine(store, f"{name}.{i}", dims[i], dims[i + 1]) for i in range(len(dims) - 1)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers[:-1]:
            x = layer(x).tanh()
        return self.layers[-1](x)


class GRUCell:
    """Gated recurrent cell; new hidden stays in (-1, 1) if the old one does.

    h' = z * h + (1 - z) * tanh(Wn x + r * (Un h) + bn)
    """

    def __init__(self, store: ParameterStore, name: str, d_in: int, d_hidden: int):
        self.d_in = d_in
        self.d_hidden = d_hidden
        self.w_z = store.add(f"{name}.w_z", (d_in, d_hidden))
        self.u_z = store.add(f"{name}.u_z", (d_hidden, d_hidden))
        self.b_z = store.add(f"{name}.b_z", (d_hidden,), init="zeros")
        self.w_r = store.add(f"{name}.w_r", (d_in, d_hidden))
        self.u_r = store.add(f"{name}.u_r", (d_hidden, d_hidden))
        self.b_r = store.add(f"{name}.b_r", (d_hidden,), init="zeros")
        self.w_n = store.add(f"{name}.w_n", (d_in, d_hidden))
        self.u_n = store.add(f"{name}.u_n", (d_hidden, d_hidden))
        self.b_n = store.add(f"{name}.b_n", (d_hidden,), init="zeros")

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        if h.shape[-1] != self.d_hidden:
            raise ConfigurationError(
                f"hidden width {h.shape[-1]} does not match cell width {self.d_hidden}"
            )
        z = (x @ self.w_z + h @ self.u_z + self.b_z).sigmoid()
        r = (x @ self.w_r + h @ self.u_r + self.b_r).sigmoid()
        n = (x @ self.w_n + r * (h @ self.u_n) + self.b_n).tanh()
        return z * h + (1.0 - z) * n


class LayerNorm:
    """Per-row normalization over the last axis with learned scale and shift."""

    def __init__(self, store: ParameterStore, name: str, width: int, eps: float = 1e-6):
        self.scale = store.add(f"{name}.scale", (width,), init="zeros")
        self.shift = store.add(f"{name}.shift", (width,), init="zeros")
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        normed = centered * (var + self.eps) ** -0.5
        return normed * (1.0 + self.scale) + self.shift


def attention_forward(
    queries: Tensor,
    keys: Tensor,
    values: Tensor,
    heads: int,
    mask: np.ndarray | None = None,
) -> Tensor:
    """Scaled-dot-product multi-head attention core.

    ``queries`` is (Nq, D).  ``keys``/``values`` are either shared (S, D) or
    per-query (Nq, S, D).  ``mask`` is a boolean (Nq, S) validity array; masked
    tokens receive exactly zero attention weight, and a query row with no
    valid key yields a zero output row.
    """
    nq, d = queries.shape
    if keys.shape != values.shape:
        raise ConfigurationError("keys and values must agree in shape")
    if d % heads != 0:
        raise ConfigurationError(f"head count {heads} does not divide width {d}")
    dh = d // heads
    s = keys.shape[-2]

    q = queries.reshape(nq, 1, heads, dh)
    if keys.ndim == 2:
        k = keys.reshape(1, s, heads, dh)
        v = values.reshape(1, s, heads, dh)
    else:
        k = keys.reshape(nq, s, heads, dh)
        v = values.reshape(nq, s, heads, dh)

    scores = (q * k).sum(axis=3) * (1.0 / np.sqrt(dh))  # (nq, s, heads)
    if mask is not None:
        bias = np.where(np.asarray(mask, dtype=bool), 0.0, MASK_BIAS)
        scores = scores + bias[:, :, None]
    weights = scores.softmax(axis=1)
    if mask is not None:
        row_valid = np.asarray(mask, dtype=bool).any(axis=1).astype(default_dtype())
        weights = weights * row_valid[:, None, None]
    out = (weights.reshape(nq, s, heads, 1) * v).sum(axis=1)  # (nq, heads, dh)
    return out.reshape(nq, d)


class MultiHeadAttention:
    """Projected multi-head attention block around :func:`attention_forward`."""

    def __init__(self, store: ParameterStore, name: str, width: int, heads: int):
        self.heads = heads
        self.proj_q = Affine(store, f"{name}.q", width, width)
        self.proj_k = Affine(store, f"{name}.k", width, width)
        self.proj_v = Affine(store, f"{name}.v", width, width)
        self.proj_out = Affine(store, f"{name}.out", width, width)

    def __call__(self, q_in: Tensor, kv_in: Tensor, mask: np.ndarray | None = None) -> Tensor:
        out = attention_forward(
            self.proj_q(q_in), self.proj_k(kv_in), self.proj_v(kv_in), self.heads, mask
        )
        return self.proj_out(out)


def masked_mean(x: Tensor, mask: np.ndarray, axis: int) -> Tensor:
    """Mean over ``axis`` counting only entries where ``mask`` is true."""
    m = np.asarray(mask, dtype=default_dtype())
    counts = np.maximum(m.sum(axis=axis), 1.0)
    return (x * Tensor(m)).sum(axis=axis) * Tensor(1.0 / counts)
