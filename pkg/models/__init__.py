from .params import ParamSet
from .autodiff import Tape, Var, backward
from .layers import Network, RecurrentState, lstm_step, mlp_forward, relnet_forward
from .optim import OptState, adam_update, init_opt_state
from .agents import ActorCritic, build_agent

__all__ = [
    "ParamSet",
    "Tape",
    "Var",
    "backward",
    "Network",
    "RecurrentState",
    "lstm_step",
    "mlp_forward",
    "relnet_forward",
    "OptState",
    "adam_update",
    "init_opt_state",
    "ActorCritic",
    "build_agent",
]
