from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from exceptions import ConfigurationError, NumericError
from models.params import ParamSet
from schemas.training_schemas import OptimConfig


@dataclass
class LearningRateSchedule:
    """Linear decay from `initial` to `final` across `total_iterations`"""
    initial: float = 5e-4
    final: float = 5e-5
    total_iterations: int = 1
    iteration: int = 0

    def rate(self) -> float:
        if self.total_iterations <= 1:
            return self.initial
        progress = min(self.iteration, self.total_iterations - 1) / (self.total_iterations - 1)
        return self.initial + (self.final - self.initial) * progress


@dataclass
class OptState:
    first_moment: "OrderedDict[str, np.ndarray]"
    second_moment: "OrderedDict[str, np.ndarray]"
    schedule: LearningRateSchedule = field(default_factory=LearningRateSchedule)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @property
    def learning_rate(self) -> float:
        return self.schedule.rate()

    def copy(self) -> "OptState":
        return OptState(
            OrderedDict((k, v.copy()) for k, v in self.first_moment.items()),
            OrderedDict((k, v.copy()) for k, v in self.second_moment.items()),
            LearningRateSchedule(**vars(self.schedule)),
            self.step,
            self.beta1,
            self.beta2,
            self.epsilon,
        )


def init_opt_state(params: ParamSet, config: Optional[OptimConfig] = None, total_iterations: int = 1) -> OptState:
    config = config or OptimConfig()
    return OptState(
        first_moment=OrderedDict((name, np.zeros_like(values)) for name, values in params.items()),
        second_moment=OrderedDict((name, np.zeros_like(values)) for name, values in params.items()),
        schedule=LearningRateSchedule(config.learning_rate, config.final_learning_rate, total_iterations),
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
    )


def advance_schedule(opt: OptState, iteration: int) -> None:
    opt.schedule.iteration = iteration


def clip_by_global_norm(grads: ParamSet, max_norm: Optional[float]) -> Tuple[ParamSet, float]:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.records.values())))
    if max_norm is None or norm <= max_norm or norm == 0.0:
        return grads, norm
    scale = max_norm / norm
    clipped = ParamSet(OrderedDict((name, g * scale) for name, g in grads.items()), grads.version)
    return clipped, norm


def adam_update(params: ParamSet, grads: ParamSet, opt: OptState) -> Tuple[ParamSet, OptState]:
    """Bias-corrected Adam step; returns new objects and leaves the inputs untouched"""
    if not params.mirrors(grads):
        raise ConfigurationError("Gradient records do not mirror the parameters", code="SHAPE_MISMATCH")
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"Gradient of '{name}' is not finite", record=name)
    missing = [name for name in params if name not in opt.first_moment]
    if missing:
        raise ConfigurationError("Optimizer state does not cover every record", details={"records": missing})

    new_opt = opt.copy()
    new_opt.step += 1
    rate = new_opt.learning_rate
    correction1 = 1.0 - new_opt.beta1 ** new_opt.step
    correction2 = 1.0 - new_opt.beta2 ** new_opt.step
    new_params = params.copy()
    new_params.version = params.version + 1
    for name, grad in grads.items():
        m = new_opt.beta1 * new_opt.first_moment[name] + (1.0 - new_opt.beta1) * grad
        v = new_opt.beta2 * new_opt.second_moment[name] + (1.0 - new_opt.beta2) * grad * grad
        new_opt.first_moment[name] = m
        new_opt.second_moment[name] = v
        step = rate * (m / correction1) / (np.sqrt(v / correction2) + new_opt.epsilon)
        new_params.records[name] = params.records[name] - step
    return new_params, new_opt


def opt_state_records(opt: OptState) -> Dict[str, np.ndarray]:
    """Flatten an optimizer state into named arrays for the BCPO container"""
    records: Dict[str, np.ndarray] = OrderedDict()
    for name, values in opt.first_moment.items():
        records[f"m/{name}"] = values
    for name, values in opt.second_moment.items():
        records[f"v/{name}"] = values
    records["opt/step"] = np.array([float(opt.step)])
    records["opt/schedule"] = np.array(
        [opt.schedule.initial, opt.schedule.final, float(opt.schedule.total_iterations), float(opt.schedule.iteration)]
    )
    records["opt/betas"] = np.array([opt.beta1, opt.beta2, opt.epsilon])
    return records


def opt_state_from_records(records: Dict[str, np.ndarray]) -> OptState:
    try:
        schedule = records["opt/schedule"]
        betas = records["opt/betas"]
        step = int(records["opt/step"][0])
    except KeyError as error:
        raise ConfigurationError(f"Optimizer state lacks record {error}") from None
    first = OrderedDict((k[2:], v) for k, v in records.items() if k.startswith("m/"))
    second = OrderedDict((k[2:], v) for k, v in records.items() if k.startswith("v/"))
    return OptState(
        first,
        second,
        LearningRateSchedule(float(schedule[0]), float(schedule[1]), int(schedule[2]), int(schedule[3])),
        step,
        float(betas[0]),
        float(betas[1]),
        float(betas[2]),
    )
