"""From-scratch dense neural substrate with hand-derived gradients."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .ops import (
    AttentionParams,
    LstmParams,
    Tensor2,
    causal_mask,
    layer_norm,
    layer_norm_backward,
    linear,
    linear_backward,
    lstm_cell,
    lstm_cell_backward,
    lstm_cell_forward,
    self_attention,
    self_attention_backward,
    self_attention_forward,
    sigmoid,
    softmax_rows,
    softmax_rows_backward,
)
from .optim import AdamW, AdamWState, adamw_step

__all__ = [
    "AttentionParams",
    "LstmParams",
    "Tensor2",
    "causal_mask",
    "layer_norm",
    "layer_norm_backward",
    "linear",
    "linear_backward",
    "lstm_cell",
    "lstm_cell_backward",
    "lstm_cell_forward",
    "self_attention",
    "self_attention_backward",
    "self_attention_forward",
    "sigmoid",
    "softmax_rows",
    "softmax_rows_backward",
    "AdamW",
    "AdamWState",
    "adamw_step",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "grad_check",
]
