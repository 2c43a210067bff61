from dataclasses import dataclass
from typing import Mapping

import numpy as np

from speaker_adaptive.exceptions import ContractError, DimensionError, NumericalError
from speaker_adaptive.training.config import TrainConfig


@dataclass
class AdamState:
    """First and second moment estimates per parameter, plus the last step index."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros(cls, params: Mapping[str, np.ndarray]) -> "AdamState":
        return cls(
            m={name: np.zeros_like(value) for name, value in params.items()},
            v={name: np.zeros_like(value) for name, value in params.items()},
        )

    def copy(self) -> "AdamState":
        return AdamState(
            m={k: v.copy() for k, v in self.m.items()},
            v={k: v.copy() for k, v in self.v.items()},
            step=self.step,
        )

    def equals(self, other: "AdamState") -> bool:
        return (
            self.step == other.step
            and self.m.keys() == other.m.keys()
            and self.v.keys() == other.v.keys()
            and all(np.array_equal(self.m[k], other.m[k]) for k in self.m)
            and all(np.array_equal(self.v[k], other.v[k]) for k in self.v)
        )


def check_finite(grads: Mapping[str, np.ndarray]) -> None:
    for name, grad in grads.items():
        if not np.isfinite(grad).all():
            raise NumericalError("Non-finite gradient", parameter=name)


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    moments: AdamState,
    step_index: int,
    config: TrainConfig,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """
    One bias-corrected Adam update of the parameters named in `grads`.

    Returns new parameter arrays for those names and the new moment state; the
    inputs are left untouched.
    """
    if step_index < 1:
        raise ContractError(f"Adam steps are counted from 1, got {step_index}")
    check_finite(grads)

    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1**step_index
    correction2 = 1.0 - b2**step_index
    state = moments.copy()
    updated: dict[str, np.ndarray] = {}
    for name, grad in grads.items():
        value = params[name]
        if grad.shape != value.shape or state.m[name].shape != value.shape:
            raise DimensionError(
                f"{name}: parameter {value.shape}, gradient {grad.shape}, "
                f"moment {state.m[name].shape}"
            )
        m = b1 * state.m[name] + (1.0 - b1) * grad
        v = b2 * state.v[name] + (1.0 - b2) * grad * grad
        step = config.learning_rate * (m / correction1) / (
            np.sqrt(v / correction2) + config.epsilon
        )
        updated[name] = value - step
        state.m[name], state.v[name] = m, v
    state.step = step_index
    return updated, state
