"""Massive MIMO user scheduling: channels, ZF rates, classical schedulers and
a soft actor-critic scheduler with KNN action discretisation."""

from .channel import ChannelTrace, ScenarioConfig, TraceFormatError
from .codec import ActionCodec, count_actions
from .env import SchedulingEnv, build_state
from .fairness import FairnessLedger, jfi
from .phy import SingularChannelError

__version__ = "0.1.0"

__all__ = ["ActionCodec", "ChannelTrace", "FairnessLedger", "ScenarioConfig", "SchedulingEnv",
           "SingularChannelError", "TraceFormatError", "build_state", "count_actions", "jfi"]
