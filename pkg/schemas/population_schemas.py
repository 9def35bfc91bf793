from pydantic import BaseModel, Field, field_validator, model_validator
from typing import Dict, List, Literal, Optional

from config import settings
from exceptions import ConfigurationError
from schemas.env_schemas import TsgConfig
from schemas.label_schemas import SkillLevel
from schemas.network_schemas import TsgNetConfig
from schemas.training_schemas import OptimConfig, PpoHyper


class PopulationConfig(BaseModel):
    """Self-play schedule of one partner population"""
    clone_iterations: int = Field(default=3000, ge=0, description="Iterations with both seats on the latest parameters")
    coop_iterations: int = Field(default=1000, ge=0, description="Iterations against frozen snapshots")
    snapshot_interval: int = Field(default=100, gt=0)
    eval_episodes: int = Field(default=500, gt=0, description="Self-play episodes per snapshot evaluation")
    wave_size: int = Field(default=50, gt=0, description="Episodes stepped in lockstep")
    tsg: TsgConfig = Field(default_factory=TsgConfig)
    net: TsgNetConfig = Field(default_factory=TsgNetConfig)
    hyper: PpoHyper = Field(default_factory=PpoHyper)
    optim: OptimConfig = Field(default_factory=OptimConfig)

    @property
    def total_iterations(self) -> int:
        return self.clone_iterations + self.coop_iterations


class SnapshotInfo(BaseModel):
    """One frozen policy of a population"""
    iteration: int = Field(..., ge=0)
    phase: Literal["clone", "coop"] = "clone"
    file: str
    digest: str = Field(..., min_length=64, max_length=64, description="SHA-256 of the checkpoint bytes")
    eval_return: Optional[float] = None


class PopulationManifest(BaseModel):
    """Contents of manifest.txt"""
    format_version: int = settings.MANIFEST_FORMAT_VERSION
    seed: int
    config: PopulationConfig = Field(default_factory=PopulationConfig)
    snapshots: List[SnapshotInfo] = Field(default_factory=list)
    skill_map: Dict[SkillLevel, int] = Field(default_factory=dict, description="Skill level to snapshot iteration")

    @field_validator("format_version")
    @classmethod
    def validate_format_version(cls, v):
        if v != settings.MANIFEST_FORMAT_VERSION:
            raise ValueError(f"Unsupported manifest format version {v}")
        return v

    @model_validator(mode="after")
    def validate_snapshots(self):
        iterations = [snapshot.iteration for snapshot in self.snapshots]
        if len(set(iterations)) != len(iterations):
            raise ValueError("Snapshot iterations must be unique")
        if self.skill_map:
            known = set(iterations)
            if any(iteration not in known for iteration in self.skill_map.values()):
                raise ValueError("Skill map references an unknown snapshot")
            if self.skill_map.get(SkillLevel.NOVICE) != min(iterations):
                raise ValueError("Novice must be the first snapshot")
            if self.skill_map.get(SkillLevel.SKILLED) != max(iterations):
                raise ValueError("Skilled must be the final snapshot")
        return self

    def snapshot(self, iteration: int) -> SnapshotInfo:
        for snapshot in self.snapshots:
            if snapshot.iteration == iteration:
                return snapshot
        raise ConfigurationError(f"Population has no snapshot at iteration {iteration}", code="UNKNOWN_SNAPSHOT")

    def skill_snapshot(self, level: SkillLevel) -> SnapshotInfo:
        return self.snapshot(self.skill_map[level])
