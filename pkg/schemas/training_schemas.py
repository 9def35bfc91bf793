from pydantic import BaseModel, Field, model_validator
from typing import Optional


class PpoHyper(BaseModel):
    """PPO hyper-parameters"""
    gamma: float = Field(default=0.99, gt=0.0, le=1.0, description="Discount factor")
    gae_lambda: float = Field(default=0.95, gt=0.0, le=1.0, description="GAE lambda")
    clip_epsilon: float = Field(default=0.2, gt=0.0, lt=1.0, description="Surrogate clip range")
    epochs: int = Field(default=4, gt=0, description="Passes over each batch")
    minibatch_size: int = Field(default=500, gt=0, description="Transitions per minibatch")
    entropy_coef: float = Field(default=0.01, ge=0.0)
    value_coef: float = Field(default=0.5, ge=0.0)
    batch_steps: int = Field(default=4000, gt=0, description="Time steps collected per iteration")
    max_grad_norm: Optional[float] = Field(default=0.5, gt=0.0, description="Per-network gradient norm clip")
    normalize_advantages: bool = Field(default=True)


class OptimConfig(BaseModel):
    """Adam settings with linear learning-rate decay"""
    learning_rate: float = Field(default=5e-4, ge=0.0, description="Initial learning rate")
    final_learning_rate: float = Field(default=5e-5, ge=0.0, description="Learning rate after the last iteration")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)

    @model_validator(mode="after")
    def validate_schedule(self):
        if self.final_learning_rate > self.learning_rate:
            raise ValueError("Learning rate schedule must not increase")
        return self


class IterationStats(BaseModel):
    """One row of a training stats CSV"""
    iteration: int
    mean_return: float
    mean_length: float
    policy_loss: float
    value_loss: float
    clip_fraction: float = Field(..., ge=0.0, le=1.0)
    entropy: float


class PredictorConfig(BaseModel):
    """Supervised training of a task-prediction network"""
    iterations: int = Field(default=2000, gt=0)
    batch_episodes: int = Field(default=50, gt=0, description="Trajectories per update")
    dataset_episodes: int = Field(default=5000, gt=0, description="Trajectories generated for training")
    optim: OptimConfig = Field(default_factory=OptimConfig)
    log_interval: int = Field(default=100, ge=0)


class PredictorStats(BaseModel):
    """One row of a predictor training curve"""
    iteration: int
    loss: float
    final_step_accuracy: float = Field(..., ge=0.0, le=1.0)
