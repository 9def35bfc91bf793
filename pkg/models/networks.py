"""
Network shapes used by the experiments. Matrix-game widths are fixed; gridworld
widths come from TsgNetConfig, whose defaults are the full-size networks.
"""
from typing import Optional

from envs.matrix import MATRIX_OBS_WIDTH, N_ACTIONS
from envs.tsg import N_MOVES, PAIR_WIDTH
from schemas.label_schemas import SkillLevel
from schemas.network_schemas import LayerSpec, NetSpec, TsgNetConfig

N_SKILLS = len(SkillLevel)
RL2_OBS_WIDTH = 2 * N_ACTIONS + 2


def _relation(net: TsgNetConfig) -> LayerSpec:
    return LayerSpec(
        kind="relation",
        widths=[net.pre_width] * net.pre_layers,
        post_widths=[net.post_width] * net.post_layers,
    )


# matrix game

def matrix_policy_spec() -> NetSpec:
    return NetSpec(
        name="policy",
        input_width=MATRIX_OBS_WIDTH,
        extra_width=N_ACTIONS,
        layers=[
            LayerSpec(kind="feedforward", widths=[6, 16]),
            LayerSpec(kind="feedforward", widths=[N_ACTIONS], activation="softmax"),
        ],
    )


def matrix_value_spec() -> NetSpec:
    return NetSpec(
        name="value",
        input_width=MATRIX_OBS_WIDTH,
        extra_width=N_ACTIONS,
        layers=[
            LayerSpec(kind="feedforward", widths=[6, 16]),
            LayerSpec(kind="feedforward", widths=[1], activation="none"),
        ],
    )


def matrix_predictor_spec() -> NetSpec:
    return NetSpec(
        name="predictor",
        input_width=MATRIX_OBS_WIDTH,
        layers=[
            LayerSpec(kind="recurrent", widths=[32]),
            LayerSpec(kind="feedforward", widths=[16]),
            LayerSpec(kind="feedforward", widths=[N_ACTIONS], activation="softmax"),
        ],
    )


def rl2_policy_spec() -> NetSpec:
    return NetSpec(
        name="policy",
        input_width=RL2_OBS_WIDTH,
        layers=[
            LayerSpec(kind="recurrent", widths=[32]),
            LayerSpec(kind="feedforward", widths=[16]),
            LayerSpec(kind="feedforward", widths=[N_ACTIONS], activation="softmax"),
        ],
    )


def rl2_value_spec() -> NetSpec:
    return NetSpec(
        name="value",
        input_width=RL2_OBS_WIDTH,
        extra_width=N_ACTIONS,
        layers=[
            LayerSpec(kind="recurrent", widths=[16]),
            LayerSpec(kind="feedforward", widths=[16]),
            LayerSpec(kind="feedforward", widths=[1], activation="none"),
        ],
    )


# gridworld

def tsg_policy_spec(net: Optional[TsgNetConfig] = None, conditioned: bool = False) -> NetSpec:
    """Relation net and two MLP layers; a conditioned policy sees the skill label in every pair"""
    net = net or TsgNetConfig()
    return NetSpec(
        name="policy",
        input_width=PAIR_WIDTH + (N_SKILLS if conditioned else 0),
        layers=[
            _relation(net),
            LayerSpec(kind="feedforward", widths=[net.head_width, net.head_width]),
            LayerSpec(kind="feedforward", widths=[N_MOVES], activation="softmax"),
        ],
    )


def tsg_value_spec(net: Optional[TsgNetConfig] = None, labelled: bool = True) -> NetSpec:
    """Relation net, optionally joined by the ground-truth skill one-hot, and two MLP layers"""
    net = net or TsgNetConfig()
    return NetSpec(
        name="value",
        input_width=PAIR_WIDTH,
        extra_width=N_SKILLS if labelled else 0,
        layers=[
            _relation(net),
            LayerSpec(kind="feedforward", widths=[net.head_width, net.head_width]),
            LayerSpec(kind="feedforward", widths=[1], activation="none"),
        ],
    )


def lstm_policy_spec(net: Optional[TsgNetConfig] = None) -> NetSpec:
    net = net or TsgNetConfig()
    return NetSpec(
        name="policy",
        input_width=PAIR_WIDTH,
        layers=[
            _relation(net),
            LayerSpec(kind="recurrent", widths=[net.lstm_units]),
            LayerSpec(kind="feedforward", widths=[N_MOVES], activation="softmax"),
        ],
    )


def skill_predictor_spec(net: Optional[TsgNetConfig] = None) -> NetSpec:
    net = net or TsgNetConfig()
    return NetSpec(
        name="predictor",
        input_width=PAIR_WIDTH,
        layers=[
            _relation(net),
            LayerSpec(kind="recurrent", widths=[net.lstm_units]),
            LayerSpec(kind="feedforward", widths=[net.head_width, net.head_width]),
            LayerSpec(kind="feedforward", widths=[N_SKILLS], activation="softmax"),
        ],
    )
