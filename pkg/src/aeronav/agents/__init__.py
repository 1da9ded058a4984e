"""Dialog tokenization, waypoint policies, the oracle, and training."""

from .base import AgentOutput, AgentState
from .models import (
    LstmPolicy,
    ModelConfig,
    POLICY_KINDS,
    TransformerPolicy,
    embed_inputs,
    patch_blocks,
    policy_from_checkpoint,
    pooled_patches,
    sinusoidal_positions,
)
from .oracle import oracle_policy
from .training import (
    TrainConfig,
    TrainingSample,
    augment_sample,
    batch_loss,
    build_state,
    episode_samples,
    sample_loss,
    split_loss,
    train,
)
from .vocab import (
    INS_ID,
    INS_TOKEN,
    OOV_ID,
    OOV_TOKEN,
    QUE_ID,
    QUE_TOKEN,
    TokenSequence,
    Vocabulary,
    tokenize_dialog,
)

__all__ = [
    "AgentOutput", "AgentState", "LstmPolicy", "ModelConfig", "POLICY_KINDS",
    "TransformerPolicy", "embed_inputs", "patch_blocks",
    "policy_from_checkpoint", "pooled_patches", "sinusoidal_positions",
    "oracle_policy", "TrainConfig", "TrainingSample", "augment_sample",
    "batch_loss", "build_state", "episode_samples", "sample_loss",
    "split_loss", "train", "INS_ID", "INS_TOKEN", "OOV_ID", "OOV_TOKEN",
    "QUE_ID", "QUE_TOKEN", "TokenSequence", "Vocabulary", "tokenize_dialog",
]
