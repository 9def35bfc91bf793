"""
Reverse-mode differentiation over a per-batch tape.

Every operation evaluates eagerly with numpy and, when the tape records, appends a
node holding its inputs. `Tape.backward` walks the nodes in reverse creation order
and applies the rule registered for each op name; a node whose op has no rule is a
configuration error. Tapes are discarded after one backward pass.
"""
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from exceptions import ConfigurationError, NumericError, UsageError
from models.params import ParamSet

ArrayLike = Union[np.ndarray, float, int]


class Var:
    __slots__ = ("tape", "value", "op", "parents", "ctx", "index")
    __array_ufunc__ = None

    def __init__(self, tape: "Tape", value: np.ndarray, op: str, parents: Tuple["Var", ...] = (), ctx: Any = None):
        self.tape = tape
        self.value = value
        self.op = op
        self.parents = parents
        self.ctx = ctx
        self.index = tape._register(self)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"<Var op={self.op} shape={self.shape}>"

    # elementwise arithmetic

    def _lift(self, other: Union["Var", ArrayLike]) -> "Var":
        return other if isinstance(other, Var) else self.tape.const(other)

    def __add__(self, other):
        other = self._lift(other)
        return Var(self.tape, self.value + other.value, "add", (self, other))

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        return Var(self.tape, self.value - other.value, "sub", (self, other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        return Var(self.tape, self.value * other.value, "mul", (self, other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        return Var(self.tape, self.value / other.value, "div", (self, other))

    def __neg__(self):
        return Var(self.tape, -self.value, "neg", (self,))

    def square(self) -> "Var":
        return Var(self.tape, self.value * self.value, "square", (self,))

    def minimum(self, other) -> "Var":
        other = self._lift(other)
        return Var(self.tape, np.minimum(self.value, other.value), "minimum", (self, other))

    def clip(self, low: float, high: float) -> "Var":
        return Var(self.tape, np.clip(self.value, low, high), "clip", (self,), (low, high))

    # nonlinearities

    def tanh(self) -> "Var":
        return Var(self.tape, np.tanh(self.value), "tanh", (self,))

    def sigmoid(self) -> "Var":
        return Var(self.tape, _sigmoid(self.value), "sigmoid", (self,))

    def exp(self) -> "Var":
        return Var(self.tape, np.exp(self.value), "exp", (self,))

    def log(self) -> "Var":
        return Var(self.tape, np.log(self.value), "log", (self,))

    def softmax(self) -> "Var":
        return Var(self.tape, softmax(self.value), "softmax", (self,))

    def log_softmax(self) -> "Var":
        return Var(self.tape, log_softmax(self.value), "log_softmax", (self,))

    # reductions and indexing

    def sum(self, axis: Optional[int] = None) -> "Var":
        return Var(self.tape, np.asarray(self.value.sum(axis=axis)), "sum", (self,), axis)

    def mean(self) -> "Var":
        return self.sum() * (1.0 / self.value.size)

    def take(self, indices: np.ndarray) -> "Var":
        """Pick one entry of the last axis per leading row"""
        indices = np.asarray(indices, dtype=np.int64)
        rows = np.arange(self.value.shape[0])
        return Var(self.tape, self.value[rows, indices], "take", (self,), indices)

    def columns(self, start: int, stop: int) -> "Var":
        return Var(self.tape, self.value[..., start:stop], "columns", (self,), (start, stop))

    def reshape(self, *shape: int) -> "Var":
        return Var(self.tape, self.value.reshape(shape), "reshape", (self,))


class Tape:
    """
    Records one forward computation over a frozen ParamSet.
    A tape built with record=False evaluates the same ops without keeping nodes.
    """

    def __init__(self, params: Optional[ParamSet] = None, record: bool = True):
        self.params = params if params is not None else ParamSet()
        self.record = record
        self.nodes: List[Var] = []
        self._param_vars: Dict[str, Var] = {}

    def _register(self, var: Var) -> int:
        if not self.record:
            return -1
        self.nodes.append(var)
        return len(self.nodes) - 1

    def param(self, name: str) -> Var:
        cached = self._param_vars.get(name)
        if cached is None:
            cached = Var(self, self.params[name], "param", (), name)
            self._param_vars[name] = cached
        return cached

    def const(self, value: ArrayLike) -> Var:
        return Var(self, np.asarray(value, dtype=np.float64), "const")

    def affine(self, x: Var, weight: Var, bias: Var) -> Var:
        return Var(self, x.value @ weight.value + bias.value, "affine", (x, weight, bias))

    def concat(self, parts: Sequence[Union[Var, np.ndarray]], axis: int = -1) -> Var:
        lifted = tuple(part if isinstance(part, Var) else self.const(part) for part in parts)
        value = np.concatenate([part.value for part in lifted], axis=axis)
        sizes = [part.value.shape[axis] for part in lifted]
        return Var(self, value, "concat", lifted, (axis, sizes))

    def stack(self, parts: Sequence[Var]) -> Var:
        """Stack equally shaped vars along a new leading axis"""
        return Var(self, np.stack([part.value for part in parts]), "stack", tuple(parts))

    def backward(self, loss: Var) -> ParamSet:
        """Return d(loss)/d(param) for every record of the tape's ParamSet"""
        if not self.record:
            raise UsageError("Cannot differentiate a tape that does not record")
        if loss.tape is not self:
            raise UsageError("Loss was recorded on a different tape")
        if loss.value.size != 1:
            raise ConfigurationError("Loss must be a scalar", details={"shape": list(loss.shape)})
        if not np.all(np.isfinite(loss.value)):
            raise NumericError("Loss is not finite", record="loss")

        grads: Dict[int, np.ndarray] = {loss.index: np.ones_like(loss.value)}
        result = self.params.zeros_like()
        for node in reversed(self.nodes[: loss.index + 1]):
            grad = grads.pop(node.index, None)
            if grad is None:
                continue
            if node.op == "param":
                result.records[node.ctx] += grad
                continue
            rule = BACKWARD_RULES.get(node.op)
            if rule is None:
                raise ConfigurationError(f"Unsupported op '{node.op}' in recorded graph", details={"op": node.op})
            for parent, parent_grad in zip(node.parents, rule(node, grad)):
                if parent_grad is None or parent.op == "const":
                    continue
                if parent.index in grads:
                    grads[parent.index] = grads[parent.index] + parent_grad
                else:
                    grads[parent.index] = parent_grad
        self.nodes = []
        self._param_vars = {}
        return result


def backward(params: ParamSet, tape: Tape, loss: Var) -> ParamSet:
    if tape.params is not params:
        raise UsageError("Tape was recorded over a different ParamSet")
    return tape.backward(loss)


def _sigmoid(value: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * value) + 1.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _binary(node: Var, grad_a: np.ndarray, grad_b: np.ndarray) -> List[np.ndarray]:
    a, b = node.parents
    return [_unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)]


def _affine(node: Var, grad: np.ndarray) -> List[np.ndarray]:
    x, weight, bias = node.parents
    flat_x = x.value.reshape(-1, x.value.shape[-1])
    flat_grad = grad.reshape(-1, grad.shape[-1])
    return [grad @ weight.value.T, flat_x.T @ flat_grad, flat_grad.sum(axis=0).reshape(bias.shape)]


def _sum(node: Var, grad: np.ndarray) -> List[np.ndarray]:
    (x,) = node.parents
    axis = node.ctx
    if axis is not None:
        grad = np.expand_dims(grad, axis)
    return [np.broadcast_to(grad, x.shape).copy()]


def _take(node: Var, grad: np.ndarray) -> List[np.ndarray]:
    (x,) = node.parents
    out = np.zeros_like(x.value)
    out[np.arange(x.shape[0]), node.ctx] = grad
    return [out]


def _columns(node: Var, grad: np.ndarray) -> List[np.ndarray]:
    (x,) = node.parents
    start, stop = node.ctx
    out = np.zeros_like(x.value)
    out[..., start:stop] = grad
    return [out]


def _concat(node: Var, grad: np.ndarray) -> List[np.ndarray]:
    axis, sizes = node.ctx
    splits = np.cumsum(sizes)[:-1]
    return list(np.split(grad, splits, axis=axis))


def _softmax(node: Var, grad: np.ndarray) -> List[np.ndarray]:
    y = node.value
    return [y * (grad - (grad * y).sum(axis=-1, keepdims=True))]


def _log_softmax(node: Var, grad: np.ndarray) -> List[np.ndarray]:
    probs = np.exp(node.value)
    return [grad - probs * grad.sum(axis=-1, keepdims=True)]


def _clip(node: Var, grad: np.ndarray) -> List[np.ndarray]:
    (x,) = node.parents
    low, high = node.ctx
    return [grad * ((x.value >= low) & (x.value <= high))]


def _minimum(node: Var, grad: np.ndarray) -> List[np.ndarray]:
    a, b = node.parents
    take_a = a.value <= b.value
    return _binary(node, grad * take_a, grad * ~take_a)


BACKWARD_RULES: Dict[str, Callable[[Var, np.ndarray], List[Optional[np.ndarray]]]] = {
    "const": lambda node, grad: [],
    "add": lambda node, grad: _binary(node, grad, grad),
    "sub": lambda node, grad: _binary(node, grad, -grad),
    "mul": lambda node, grad: _binary(node, grad * node.parents[1].value, grad * node.parents[0].value),
    "div": lambda node, grad: _binary(
        node,
        grad / node.parents[1].value,
        -grad * node.parents[0].value / (node.parents[1].value ** 2),
    ),
    "neg": lambda node, grad: [-grad],
    "square": lambda node, grad: [2.0 * node.parents[0].value * grad],
    "minimum": _minimum,
    "clip": _clip,
    "tanh": lambda node, grad: [grad * (1.0 - node.value ** 2)],
    "sigmoid": lambda node, grad: [grad * node.value * (1.0 - node.value)],
    "exp": lambda node, grad: [grad * node.value],
    "log": lambda node, grad: [grad / node.parents[0].value],
    "softmax": _softmax,
    "log_softmax": _log_softmax,
    "sum": _sum,
    "take": _take,
    "columns": _columns,
    "reshape": lambda node, grad: [grad.reshape(node.parents[0].shape)],
    "affine": _affine,
    "concat": _concat,
    "stack": lambda node, grad: list(grad),
}
