"""
Actor-critic wiring: which inputs reach the policy and which reach the value network.

The policy path only ever receives the observation and an explicit conditioning
vector (the ground truth while training a conditioned policy, the predictor output
while executing). The ground-truth label reaches the value network alone.
"""
import enum
from typing import List, Optional, Tuple

import numpy as np

from exceptions import ConfigurationError
from models.layers import Network, RecurrentState
from models.networks import (
    lstm_policy_spec,
    matrix_policy_spec,
    matrix_value_spec,
    rl2_policy_spec,
    rl2_value_spec,
    tsg_policy_spec,
    tsg_value_spec,
)
from models.params import ParamSet
from schemas.network_schemas import NetSpec, TsgNetConfig

Inputs = Tuple[np.ndarray, Optional[np.ndarray]]


class Conditioning(str, enum.Enum):
    """How the conditioning vector enters the policy"""
    NONE = "none"
    SIDE_INPUT = "side_input"
    PAIRS = "pairs"


class ActorCritic:
    def __init__(self, kind: str, policy_spec: NetSpec, value_spec: NetSpec, conditioning: Conditioning):
        self.kind = kind
        self.policy = Network(policy_spec)
        self.value = Network(value_spec)
        self.conditioning = conditioning
        self.value_labelled = value_spec.extra_width > 0

    @property
    def conditioned(self) -> bool:
        return self.conditioning != Conditioning.NONE

    @property
    def recurrent(self) -> bool:
        return self.policy.spec.is_recurrent or self.value.spec.is_recurrent

    def init_params(self, rng: np.random.Generator) -> ParamSet:
        return self.policy.init_params(rng).merged(self.value.init_params(rng))

    def policy_inputs(self, observations: np.ndarray, conditioning: Optional[np.ndarray] = None) -> Inputs:
        if self.conditioning == Conditioning.NONE:
            return observations, None
        if conditioning is None:
            raise ConfigurationError(f"Policy '{self.kind}' needs a conditioning vector", code="MISSING_CONDITIONING")
        if self.conditioning == Conditioning.SIDE_INPUT:
            return observations, conditioning
        broadcast = np.broadcast_to(
            conditioning[:, None, :], (observations.shape[0], observations.shape[1], conditioning.shape[-1])
        )
        return np.concatenate([observations, broadcast], axis=-1), None

    def value_inputs(self, observations: np.ndarray, truth: Optional[np.ndarray] = None) -> Inputs:
        if not self.value_labelled:
            return observations, None
        if truth is None:
            raise ConfigurationError(f"Value network of '{self.kind}' needs the ground-truth label", code="MISSING_LABEL")
        return observations, truth

    def initial_states(self, batch: int) -> Tuple[List[RecurrentState], List[RecurrentState]]:
        return self.policy.initial_state(batch), self.value.initial_state(batch)

    def action_probs(
        self,
        params: ParamSet,
        observations: np.ndarray,
        conditioning: Optional[np.ndarray] = None,
        state: Optional[List[RecurrentState]] = None,
    ) -> Tuple[np.ndarray, List[RecurrentState]]:
        x, extra = self.policy_inputs(observations, conditioning)
        return self.policy.predict(params, x, state, extra)

    def state_values(
        self,
        params: ParamSet,
        observations: np.ndarray,
        truth: Optional[np.ndarray] = None,
        state: Optional[List[RecurrentState]] = None,
    ) -> Tuple[np.ndarray, List[RecurrentState]]:
        x, extra = self.value_inputs(observations, truth)
        values, next_state = self.value.predict(params, x, state, extra)
        return values[:, 0], next_state


def matrix_conditioned_agent() -> ActorCritic:
    return ActorCritic("matrix_bc", matrix_policy_spec(), matrix_value_spec(), Conditioning.SIDE_INPUT)


def rl2_agent() -> ActorCritic:
    return ActorCritic("rl2", rl2_policy_spec(), rl2_value_spec(), Conditioning.NONE)


def tsg_self_play_agent(net: Optional[TsgNetConfig] = None) -> ActorCritic:
    return ActorCritic("tsg_selfplay", tsg_policy_spec(net), tsg_value_spec(net, labelled=False), Conditioning.NONE)


def tsg_conditioned_agent(net: Optional[TsgNetConfig] = None) -> ActorCritic:
    return ActorCritic("tsg_bc", tsg_policy_spec(net, conditioned=True), tsg_value_spec(net), Conditioning.PAIRS)


def tsg_lstm_agent(net: Optional[TsgNetConfig] = None) -> ActorCritic:
    return ActorCritic("tsg_lstm", lstm_policy_spec(net), tsg_value_spec(net), Conditioning.NONE)


AGENT_FACTORIES = {
    "matrix_bc": lambda net=None: matrix_conditioned_agent(),
    "rl2": lambda net=None: rl2_agent(),
    "tsg_selfplay": tsg_self_play_agent,
    "tsg_bc": tsg_conditioned_agent,
    "tsg_lstm": tsg_lstm_agent,
}


def build_agent(kind: str, net: Optional[TsgNetConfig] = None) -> ActorCritic:
    try:
        return AGENT_FACTORIES[kind](net)
    except KeyError:
        raise ConfigurationError(f"Unknown agent kind '{kind}'", details={"known": sorted(AGENT_FACTORIES)}) from None
