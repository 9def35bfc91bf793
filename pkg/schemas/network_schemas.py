from pydantic import BaseModel, Field, field_validator
from typing import List, Literal


class LayerSpec(BaseModel):
    """One block of a sequential network"""
    kind: Literal["feedforward", "recurrent", "relation"] = Field(..., description="Block type")
    widths: List[int] = Field(..., min_length=1, description="Layer widths (pre-summation widths for relation blocks)")
    post_widths: List[int] = Field(default_factory=list, description="Post-summation widths, relation blocks only")
    activation: Literal["tanh", "none", "softmax"] = Field(default="tanh", description="Activation of the block output")
    hidden_activation: Literal["tanh", "none"] = Field(default="tanh", description="Activation of inner layers")

    @field_validator("widths", "post_widths")
    @classmethod
    def validate_widths(cls, v):
        if any(width <= 0 for width in v):
            raise ValueError("Layer widths must be positive")
        return v


class NetSpec(BaseModel):
    """Sequential network description; `name` prefixes every parameter record"""
    name: str = Field(..., min_length=1, description="Record prefix")
    input_width: int = Field(..., gt=0, description="Width of one input vector (one pair for relation nets)")
    extra_width: int = Field(default=0, ge=0, description="Side input concatenated after the relation block")
    layers: List[LayerSpec] = Field(..., min_length=1)

    @field_validator("layers")
    @classmethod
    def validate_layers(cls, v):
        for index, layer in enumerate(v):
            if layer.kind == "relation" and index != 0:
                raise ValueError("A relation block can only be the first block")
            if layer.kind == "relation" and not layer.post_widths:
                raise ValueError("Relation blocks need post-summation widths")
            if layer.activation == "softmax" and index != len(v) - 1:
                raise ValueError("Only the last block can have a softmax head")
        return v

    @property
    def output_width(self) -> int:
        last = self.layers[-1]
        return last.post_widths[-1] if last.kind == "relation" else last.widths[-1]

    @property
    def is_relational(self) -> bool:
        return self.layers[0].kind == "relation"

    @property
    def is_recurrent(self) -> bool:
        return any(layer.kind == "recurrent" for layer in self.layers)


class TsgNetConfig(BaseModel):
    """Widths of the gridworld networks"""
    pre_width: int = Field(default=128, gt=0, description="Relation pre-summation width")
    pre_layers: int = Field(default=7, gt=0, description="Relation pre-summation depth")
    post_width: int = Field(default=64, gt=0, description="Relation post-summation width")
    post_layers: int = Field(default=2, gt=0, description="Relation post-summation depth")
    head_width: int = Field(default=64, gt=0, description="Width of the MLP layers on top of the relation net")
    lstm_units: int = Field(default=64, gt=0, description="Recurrent units of gridworld LSTM layers")
