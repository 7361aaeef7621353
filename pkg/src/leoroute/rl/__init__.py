"""Residual double-Q learning over the LG-aware backpressure prior."""
from .agent import (FEATURE_DIM, FEATURE_NAMES, FLIP, FOLLOW, QueueScale, ResidualAgent,
                    RewardWeights, TrainingDiverged, act, compute_reward, double_q_targets,
                    encode_links, residual_decision, td_loss_and_grads, train_step)
from .mlp import MLP, Adam
from .replay import ReplayBuffer
from .train import EpisodeLog, epsilon_at, make_agent, train

__all__ = [
    "FEATURE_DIM", "FEATURE_NAMES", "FLIP", "FOLLOW", "QueueScale", "ResidualAgent",
    "RewardWeights", "TrainingDiverged", "act", "compute_reward", "double_q_targets",
    "encode_links", "residual_decision", "td_loss_and_grads", "train_step", "MLP", "Adam",
    "ReplayBuffer", "EpisodeLog", "epsilon_at", "make_agent", "train",
]
