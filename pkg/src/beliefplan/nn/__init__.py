"""Dense numerical substrate: autodiff tensors, layers, optimizer, checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    MLP,
    Affine,
    GRUCell,
    LayerNorm,
    MultiHeadAttention,
    ParameterStore,
    attention_forward,
)
from .optim import AdamW, decayed_every, halved_every
from .tensor import (
    MASK_BIAS,
    Tensor,
    as_tensor,
    concat,
    default_dtype,
    grad_enabled,
    no_grad,
    set_default_dtype,
    stack,
)

__all__ = [
    "MASK_BIAS",
    "MLP",
    "AdamW",
    "Affine",
    "GRUCell",
    "LayerNorm",
    "MultiHeadAttention",
    "ParameterStore",
    "Tensor",
    "as_tensor",
    "attention_forward",
    "concat",
    "decayed_every",
    "default_dtype",
    "grad_enabled",
    "halved_every",
    "load_checkpoint",
    "no_grad",
    "save_checkpoint",
    "set_default_dtype",
    "stack",
]
