"""Request models for the CLI and the API endpoints."""

from enum import Enum
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class Command(str, Enum):
    FIT = "fit"
    TEST = "test"
    SIMULATE = "simulate"
    DIAGNOSE = "diagnose"
    ARE = "are"
    POWER = "power"


def _check_alphas(values: List[float]) -> List[float]:
    if not values:
        raise ValueError("at least one alpha is required")
    if any(a < 0 for a in values):
        raise ValueError("alpha values must be nonnegative")
    return values


class RunConfig(BaseModel):
    """Validated options of one CLI invocation."""

    command: Command
    input_path: Optional[str] = Field(default=None, description="CSV file to read")
    column: Optional[str] = Field(default=None, description="Column holding the sample")
    alpha_list: List[float] = Field(..., description="DPD tuning parameters")
    seed: int = Field(default=0, ge=0, description="Master random seed")
    output_path: Optional[str] = Field(default=None, description="Output file; stdout when omitted")
    format: Literal["json", "csv"] = "json"
    drop_outliers: bool = False
    hypothesis: Optional[str] = Field(default=None, description="gamma=<v>, sigma=<v> or mu=<v>")

    @field_validator("alpha_list")
    @classmethod
    def _alphas(cls, values: List[float]) -> List[float]:
        return _check_alphas(values)

    @model_validator(mode="after")
    def _required_inputs(self) -> "RunConfig":
        if self.command in (Command.FIT, Command.TEST) and not (self.input_path and self.column):
            raise ValueError(f"'{self.command.value}' needs --input and --column")
        if self.command is Command.TEST and not self.hypothesis:
            raise ValueError("'test' needs --hypothesis")
        return self


class ParamsModel(BaseModel):
    """Skew-normal parameter triple."""

    mu: float = Field(default=0.0, description="Location")
    sigma: float = Field(default=1.0, gt=0, description="Scale")
    gamma: float = Field(default=0.0, description="Shape")


class InfluenceRequest(BaseModel):
    """Request model for influence-curve evaluation."""

    kind: Literal["estimator_if", "test_if2", "test_pif"] = Field(default="estimator_if")
    theta: ParamsModel = Field(default_factory=lambda: ParamsModel(gamma=1.0))
    alphas: List[float] = Field(default=[0.0, 0.5], description="Tuning parameters, one curve each")
    start: float = Field(default=-10.0, description="First grid point")
    stop: float = Field(default=10.0, description="Last grid point")
    step: float = Field(default=0.5, gt=0, description="Grid spacing")
    hypothesis: Optional[str] = Field(default=None, description="Null for test_if2 / test_pif")
    d: Optional[List[float]] = Field(default=None, min_length=3, max_length=3, description="Contiguous direction")
    tau0: float = Field(default=0.05, gt=0, lt=1, description="Nominal level")

    @field_validator("alphas")
    @classmethod
    def _alphas(cls, values: List[float]) -> List[float]:
        return _check_alphas(values)

    @model_validator(mode="after")
    def _grid(self) -> "InfluenceRequest":
        if self.stop <= self.start:
            raise ValueError("stop must exceed start")
        if (self.stop - self.start) / self.step > 10000:
            raise ValueError("grid too large (more than 10000 points)")
        return self
