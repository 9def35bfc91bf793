"""
Sequential networks described by a NetSpec: feedforward stacks, LSTM cells and the
agent-object relation network, all evaluated on a Tape.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from exceptions import ConfigurationError, NumericError
from models.autodiff import Tape, Var
from models.params import ParamSet, glorot_uniform
from schemas.network_schemas import LayerSpec, NetSpec

StateVars = Tuple[Var, Var]


@dataclass
class RecurrentState:
    """Hidden and cell vectors of one LSTM layer; a leading batch axis is allowed"""
    hidden: np.ndarray
    cell: np.ndarray

    def __post_init__(self):
        if self.hidden.shape != self.cell.shape:
            raise ConfigurationError(
                "Hidden and cell state differ in shape",
                details={"hidden": list(self.hidden.shape), "cell": list(self.cell.shape)},
            )

    @classmethod
    def zeros(cls, units: int, batch: Optional[int] = None) -> "RecurrentState":
        shape = (units,) if batch is None else (batch, units)
        return cls(np.zeros(shape), np.zeros(shape))

    def check_finite(self, where: str = "lstm") -> None:
        if not (np.all(np.isfinite(self.hidden)) and np.all(np.isfinite(self.cell))):
            raise NumericError("Recurrent state is not finite", record=where)


@dataclass
class Forward:
    output: Var
    logits: Var
    state: List[StateVars]


def _activate(value: Var, activation: str) -> Var:
    if activation == "tanh":
        return value.tanh()
    if activation == "softmax":
        return value.softmax()
    return value


def init_affine(params: ParamSet, prefix: str, fan_in: int, fan_out: int, rng: np.random.Generator) -> None:
    params.add(f"{prefix}.w", glorot_uniform(rng, fan_in, fan_out))
    params.add(f"{prefix}.b", np.zeros(fan_out))


def init_lstm(params: ParamSet, prefix: str, input_width: int, units: int, rng: np.random.Generator) -> None:
    # gate layout along the output axis: input, forget, output, candidate
    params.add(f"{prefix}.w", glorot_uniform(rng, input_width + units, 4 * units))
    bias = np.zeros(4 * units)
    bias[units:2 * units] = 1.0
    params.add(f"{prefix}.b", bias)


def lstm_cell(tape: Tape, prefix: str, x: Var, state: StateVars) -> StateVars:
    hidden, cell = state
    units = hidden.shape[-1]
    gates = tape.affine(tape.concat([x, hidden]), tape.param(f"{prefix}.w"), tape.param(f"{prefix}.b"))
    input_gate = gates.columns(0, units).sigmoid()
    forget_gate = gates.columns(units, 2 * units).sigmoid()
    output_gate = gates.columns(2 * units, 3 * units).sigmoid()
    candidate = gates.columns(3 * units, 4 * units).tanh()
    new_cell = forget_gate * cell + input_gate * candidate
    new_hidden = output_gate * new_cell.tanh()
    return new_hidden, new_cell


class Network:
    """Interprets a NetSpec; parameters live in a ParamSet under the spec's name prefix"""

    def __init__(self, spec: NetSpec):
        self.spec = spec
        self.name = spec.name

    def _prefix(self, block: int) -> str:
        return f"{self.name}.b{block}"

    @property
    def recurrent_units(self) -> List[int]:
        return [layer.widths[0] for layer in self.spec.layers if layer.kind == "recurrent"]

    def init_params(self, rng: np.random.Generator) -> ParamSet:
        params = ParamSet()
        width = self.spec.input_width
        for block, layer in enumerate(self.spec.layers):
            prefix = self._prefix(block)
            if layer.kind == "relation":
                for i, out in enumerate(layer.widths):
                    init_affine(params, f"{prefix}.pre{i}", width, out, rng)
                    width = out
                for i, out in enumerate(layer.post_widths):
                    init_affine(params, f"{prefix}.post{i}", width, out, rng)
                    width = out
                width += self.spec.extra_width
            elif layer.kind == "recurrent":
                if block == 0:
                    width += self.spec.extra_width
                init_lstm(params, f"{prefix}.lstm", width, layer.widths[0], rng)
                width = layer.widths[0]
            else:
                if block == 0:
                    width += self.spec.extra_width
                for i, out in enumerate(layer.widths):
                    init_affine(params, f"{prefix}.fc{i}", width, out, rng)
                    width = out
        return params

    def initial_state(self, batch: int) -> List[RecurrentState]:
        return [RecurrentState.zeros(units, batch) for units in self.recurrent_units]

    def _check_input(self, x: np.ndarray, extra: Optional[np.ndarray]) -> None:
        if x.shape[-1] != self.spec.input_width:
            raise ConfigurationError(
                f"Input width {x.shape[-1]} does not match {self.spec.input_width} for '{self.name}'",
                code="SHAPE_MISMATCH",
            )
        if self.spec.is_relational and x.ndim != 3:
            raise ConfigurationError("Relation input must be (batch, pairs, features)", code="SHAPE_MISMATCH")
        if self.spec.is_relational and x.shape[1] == 0:
            raise ConfigurationError("Relation input needs at least one pair", code="EMPTY_PAIRS")
        extra_width = 0 if extra is None else extra.shape[-1]
        if extra_width != self.spec.extra_width:
            raise ConfigurationError(
                f"Side input width {extra_width} does not match {self.spec.extra_width} for '{self.name}'",
                code="SHAPE_MISMATCH",
            )

    def forward(
        self,
        tape: Tape,
        x: np.ndarray,
        state: Optional[Sequence[Union[RecurrentState, StateVars]]] = None,
        extra: Optional[np.ndarray] = None,
    ) -> Forward:
        """Run one time step for a batch; `state` holds one entry per recurrent block"""
        x = np.asarray(x, dtype=np.float64)
        self._check_input(x, extra)
        batch = x.shape[0]
        pending = list(state) if state is not None else list(self.initial_state(batch))
        new_state: List[StateVars] = []

        value: Var = tape.const(x)
        if extra is not None and not self.spec.is_relational:
            value = tape.concat([value, extra])
        logits = value
        for block, layer in enumerate(self.spec.layers):
            prefix = self._prefix(block)
            if layer.kind == "relation":
                value = self._relation(tape, prefix, layer, value)
                if extra is not None:
                    value = tape.concat([value, extra])
                logits = value
            elif layer.kind == "recurrent":
                entry = pending.pop(0)
                if isinstance(entry, RecurrentState):
                    entry.check_finite(prefix)
                    entry = (tape.const(entry.hidden), tape.const(entry.cell))
                hidden, cell = lstm_cell(tape, f"{prefix}.lstm", value, entry)
                new_state.append((hidden, cell))
                value = logits = hidden
            else:
                value, logits = self._feedforward(tape, prefix, layer, value)
        return Forward(output=value, logits=logits, state=new_state)

    def _feedforward(self, tape: Tape, prefix: str, layer: LayerSpec, value: Var) -> Tuple[Var, Var]:
        last = len(layer.widths) - 1
        logits = value
        for i in range(len(layer.widths)):
            logits = tape.affine(value, tape.param(f"{prefix}.fc{i}.w"), tape.param(f"{prefix}.fc{i}.b"))
            value = _activate(logits, layer.activation if i == last else layer.hidden_activation)
        return value, logits

    def _relation(self, tape: Tape, prefix: str, layer: LayerSpec, pairs: Var) -> Var:
        value = pairs
        for i in range(len(layer.widths)):
            value = tape.affine(value, tape.param(f"{prefix}.pre{i}.w"), tape.param(f"{prefix}.pre{i}.b"))
            value = _activate(value, layer.hidden_activation)
        value = value.sum(axis=-2)
        last = len(layer.post_widths) - 1
        for i in range(len(layer.post_widths)):
            value = tape.affine(value, tape.param(f"{prefix}.post{i}.w"), tape.param(f"{prefix}.post{i}.b"))
            value = _activate(value, layer.activation if i == last else layer.hidden_activation)
        return value

    def predict(
        self,
        params: ParamSet,
        x: np.ndarray,
        state: Optional[Sequence[RecurrentState]] = None,
        extra: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, List[RecurrentState]]:
        """Inference without recording; returns the output and the next recurrent state"""
        tape = Tape(params, record=False)
        result = self.forward(tape, x, state, extra)
        next_state = [RecurrentState(hidden.value, cell.value) for hidden, cell in result.state]
        return result.output.value, next_state


def mlp_forward(params: ParamSet, spec: NetSpec, input: np.ndarray) -> np.ndarray:
    """Evaluate a feedforward NetSpec on one input vector"""
    if spec.is_recurrent or spec.is_relational:
        raise ConfigurationError("mlp_forward only evaluates feedforward specs", code="SHAPE_MISMATCH")
    output, _ = Network(spec).predict(params, np.asarray(input, dtype=np.float64)[None, :])
    return output[0]


def lstm_step(params: ParamSet, state: RecurrentState, input: np.ndarray, prefix: str = "lstm") -> Tuple[RecurrentState, np.ndarray]:
    """One LSTM step over records `<prefix>.w` and `<prefix>.b`"""
    state.check_finite(prefix)
    units = params[f"{prefix}.b"].shape[0] // 4
    if state.hidden.shape[-1] != units:
        raise ConfigurationError(
            f"State has {state.hidden.shape[-1]} units, parameters have {units}", code="SHAPE_MISMATCH"
        )
    x = np.asarray(input, dtype=np.float64)
    if params[f"{prefix}.w"].shape[0] != x.shape[-1] + units:
        raise ConfigurationError("Input width does not match the LSTM weights", code="SHAPE_MISMATCH")
    tape = Tape(params, record=False)
    hidden, cell = lstm_cell(tape, prefix, tape.const(x), (tape.const(state.hidden), tape.const(state.cell)))
    new_state = RecurrentState(hidden.value, cell.value)
    new_state.check_finite(prefix)
    return new_state, hidden.value


def relnet_forward(params: ParamSet, pairs: Sequence[np.ndarray], spec: NetSpec) -> np.ndarray:
    """Embed one unordered set of pair vectors with the relation block of `spec`"""
    if not spec.is_relational or len(spec.layers) != 1:
        raise ConfigurationError("relnet_forward needs a spec holding one relation block")
    if len(pairs) == 0:
        raise ConfigurationError("Relation input needs at least one pair", code="EMPTY_PAIRS")
    stacked = np.asarray(pairs, dtype=np.float64)[None, :, :]
    output, _ = Network(spec).predict(params, stacked)
    return output[0]


def relation_spec(name: str, pair_width: int, pre: Sequence[int], post: Sequence[int], activation: str = "tanh") -> NetSpec:
    return NetSpec(
        name=name,
        input_width=pair_width,
        layers=[LayerSpec(kind="relation", widths=list(pre), post_widths=list(post), activation=activation)],
    )
