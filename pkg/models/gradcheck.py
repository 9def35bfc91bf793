"""
Central finite-difference checks of tape gradients over whole networks.

The check loss is a fixed random projection of the network output, summed over a
short unroll so recurrent blocks are differentiated through time.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from models.autodiff import Tape, Var
from models.layers import Network
from models.networks import (
    lstm_policy_spec,
    matrix_policy_spec,
    matrix_predictor_spec,
    matrix_value_spec,
    rl2_policy_spec,
    rl2_value_spec,
    skill_predictor_spec,
    tsg_policy_spec,
    tsg_value_spec,
)
from models.params import ParamSet
from schemas.network_schemas import NetSpec, TsgNetConfig

N_PAIRS = 12


@dataclass
class GradCheckResult:
    network: str
    seed: int
    coordinates: int
    max_relative_error: float


def architectures(net: Optional[TsgNetConfig] = None) -> Dict[str, NetSpec]:
    return {
        "matrix_policy": matrix_policy_spec(),
        "matrix_value": matrix_value_spec(),
        "matrix_predictor": matrix_predictor_spec(),
        "rl2_policy": rl2_policy_spec(),
        "rl2_value": rl2_value_spec(),
        "tsg_policy": tsg_policy_spec(net),
        "tsg_policy_conditioned": tsg_policy_spec(net, conditioned=True),
        "tsg_value": tsg_value_spec(net),
        "tsg_value_unlabelled": tsg_value_spec(net, labelled=False),
        "lstm_policy": lstm_policy_spec(net),
        "skill_predictor": skill_predictor_spec(net),
    }


def relative_error(analytic: float, numeric: float, floor: float = 1e-4) -> float:
    """
    Relative difference with the denominator held at `floor` or above.

    Below the floor this is an absolute test: a tolerance `tol` accepts
    |analytic - numeric| <= tol * floor. With the default floor, 1e-5 steps and
    a 1e-5 tolerance that bound is 1e-9, above the central-difference noise.
    """
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def random_inputs(spec: NetSpec, rng: np.random.Generator, batch: int, steps: int) -> List[Tuple[np.ndarray, Optional[np.ndarray]]]:
    inputs = []
    for _ in range(steps):
        if spec.is_relational:
            x = rng.normal(size=(batch, N_PAIRS, spec.input_width))
        else:
            x = rng.normal(size=(batch, spec.input_width))
        extra = rng.normal(size=(batch, spec.extra_width)) if spec.extra_width else None
        inputs.append((x, extra))
    return inputs


def projection_loss(network: Network, tape: Tape, inputs, weights: np.ndarray) -> Var:
    state = None
    total: Optional[Var] = None
    for x, extra in inputs:
        result = network.forward(tape, x, state, extra)
        state = result.state
        term = (result.output * weights).sum()
        total = term if total is None else total + term
    return total


def _loss_value(network: Network, params: ParamSet, inputs, weights: np.ndarray) -> float:
    return float(projection_loss(network, Tape(params, record=False), inputs, weights).value)


def check_network(
    spec: NetSpec,
    seed: int,
    coordinates: int = 100,
    step: float = 1e-5,
    batch: int = 3,
    unroll: int = 3,
) -> GradCheckResult:
    """Compare tape gradients with central differences at `coordinates` random parameter entries"""
    rng = np.random.default_rng(seed)
    network = Network(spec)
    params = network.init_params(rng)
    inputs = random_inputs(spec, rng, batch, unroll if spec.is_recurrent else 1)
    weights = rng.normal(size=(batch, spec.output_width))

    tape = Tape(params)
    grads = tape.backward(projection_loss(network, tape, inputs, weights))

    names = params.names()
    sizes = np.array([params[name].size for name in names], dtype=np.float64)
    worst = 0.0
    for _ in range(coordinates):
        name = names[rng.choice(len(names), p=sizes / sizes.sum())]
        index = int(rng.integers(params[name].size))
        shifted = params.copy()
        flat = shifted.records[name].reshape(-1)
        original = flat[index]
        flat[index] = original + step
        plus = _loss_value(network, shifted, inputs, weights)
        flat[index] = original - step
        minus = _loss_value(network, shifted, inputs, weights)
        numeric = (plus - minus) / (2.0 * step)
        worst = max(worst, relative_error(float(grads[name].reshape(-1)[index]), numeric))
    return GradCheckResult(spec.name, seed, coordinates, worst)
