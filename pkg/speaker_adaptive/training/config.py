from pydantic import BaseModel, ConfigDict, Field

from speaker_adaptive.defaults import DEFAULT_LAMBDA
from speaker_adaptive.enums import Ablation
from speaker_adaptive.model.params import ArchitectureConfig


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    epochs: int = Field(default=60, ge=0)
    # dialogues per optimizer step
    batch_size: int = Field(default=32, gt=0)
    learning_rate: float = Field(default=1e-3, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    lambda_spk: float = Field(default=DEFAULT_LAMBDA, ge=0, alias="lambda")
    seed: int = 0
    ablation: Ablation = Ablation.FULL
    patience: int = Field(default=10, gt=0)
    class_weighting: bool = False
    oov_rate: float = Field(default=0.05, ge=0, lt=1)
    architecture: ArchitectureConfig = Field(default_factory=ArchitectureConfig)

    def resumable_from(self, other: "TrainConfig") -> bool:
        """Everything but the epoch budget must agree to continue a run."""
        ignored = {"epochs"}
        return self.model_dump(exclude=ignored) == other.model_dump(exclude=ignored)
