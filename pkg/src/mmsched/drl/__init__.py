from .buffer import ReplayBuffer
from .knn import joint_candidates, knn_candidates
from .nn import Adam, Mlp
from .sac import SacAgent
from .smart import SmartAgent, SmartScheduler, epsilon_schedule, load_checkpoint, save_checkpoint

__all__ = ["Adam", "Mlp", "ReplayBuffer", "SacAgent", "SmartAgent", "SmartScheduler", "epsilon_schedule",
           "joint_candidates", "knn_candidates", "load_checkpoint", "save_checkpoint"]
