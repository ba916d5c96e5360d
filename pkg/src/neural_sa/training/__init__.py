from .rewards import gae_advantages, immediate_gain, primal_reward
from .optim import AdamState, SgdMomentumState, adam_step, sgd_momentum_step
from .loop import EsConfig, PpoConfig, config_from_dict, default_config, train

__all__ = [
    "immediate_gain", "primal_reward", "gae_advantages",
    "AdamState", "SgdMomentumState", "adam_step", "sgd_momentum_step",
    "EsConfig", "PpoConfig", "config_from_dict", "default_config", "train",
]
