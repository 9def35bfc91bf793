import enum
from pydantic import BaseModel, Field, field_validator
from typing import List, Literal, Union

import numpy as np


class SkillLevel(str, enum.Enum):
    """Partner classes of the gridworld, in label-vector order"""
    NOVICE = "novice"
    INTERMEDIATE = "intermediate"
    SKILLED = "skilled"

    @property
    def index(self) -> int:
        return list(SkillLevel).index(self)

    def one_hot(self) -> np.ndarray:
        vector = np.zeros(len(SkillLevel))
        vector[self.index] = 1.0
        return vector


def _validate_simplex(v: List[float], size: int) -> List[float]:
    if len(v) != size:
        raise ValueError(f"Expected {size} probabilities")
    if any(not np.isfinite(p) or p < 0.0 for p in v):
        raise ValueError("Probabilities must be finite and non-negative")
    if abs(sum(v) - 1.0) > 1e-9:
        raise ValueError("Probabilities must sum to 1")
    return v


class DistributionLabel(BaseModel):
    """Matrix game label: the partner's action distribution"""
    kind: Literal["distribution"] = "distribution"
    probs: List[float] = Field(..., description="Probabilities of p0..p4")

    @field_validator("probs")
    @classmethod
    def validate_probs(cls, v):
        return _validate_simplex(v, 5)

    def vector(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=np.float64)


class SkillLabel(BaseModel):
    """Gridworld label: probabilities over novice, intermediate, skilled"""
    kind: Literal["skill"] = "skill"
    probs: List[float] = Field(..., description="Probabilities of novice, intermediate, skilled")

    @field_validator("probs")
    @classmethod
    def validate_probs(cls, v):
        return _validate_simplex(v, len(SkillLevel))

    @classmethod
    def of(cls, level: SkillLevel) -> "SkillLabel":
        return cls(probs=level.one_hot().tolist())

    @property
    def is_one_hot(self) -> bool:
        return sorted(self.probs) == [0.0] * (len(SkillLevel) - 1) + [1.0]

    @property
    def level(self) -> SkillLevel:
        return list(SkillLevel)[int(np.argmax(self.probs))]

    def vector(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=np.float64)


BehaviourLabel = Union[DistributionLabel, SkillLabel]
