from pydantic import BaseModel, Field, field_validator, model_validator
from typing import List

import numpy as np


class ActionDistribution(BaseModel):
    """Partner action distribution of the matrix game"""
    probs: List[float] = Field(..., min_length=5, max_length=5, description="Probabilities of p0..p4")

    @field_validator("probs")
    @classmethod
    def validate_probs(cls, v):
        if any(not np.isfinite(p) or p < 0.0 for p in v):
            raise ValueError("Probabilities must be finite and non-negative")
        if abs(sum(v) - 1.0) > 1e-9:
            raise ValueError("Probabilities must sum to 1")
        return v

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=np.float64)

    @classmethod
    def delta(cls, action: int) -> "ActionDistribution":
        probs = [0.0] * 5
        probs[action] = 1.0
        return cls(probs=probs)

    @classmethod
    def uniform(cls) -> "ActionDistribution":
        return cls(probs=[0.2] * 5)


class MatrixConfig(BaseModel):
    """Matrix game settings"""
    alpha: float = Field(default=0.01, gt=0.0, description="Dirichlet concentration")
    episode_length: int = Field(default=10, gt=0, description="Fixed episode length")
    tasks_per_iteration: int = Field(default=50, gt=0, description="Partner distributions drawn per iteration")


class TsgConfig(BaseModel):
    """Travelling salesman gridworld settings"""
    width: int = Field(default=11, gt=0)
    height: int = Field(default=11, gt=0)
    n_subgoals: int = Field(default=4, gt=0)
    step_reward: float = Field(default=-0.01)
    goal_reward: float = Field(default=0.05)
    max_steps: int = Field(default=50, ge=1)

    @model_validator(mode="after")
    def validate_capacity(self):
        if self.width * self.height < self.n_subgoals + 3:
            raise ValueError("Grid cannot host every object on a distinct cell")
        return self

    @property
    def n_objects(self) -> int:
        return self.n_subgoals + 3
