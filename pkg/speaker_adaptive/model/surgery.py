"""
Ablation surgery: each variant pins its mechanism to the exact neutral configuration
and reports which parameters the optimizer must leave alone.
"""

from typing import Callable, TypeAlias

import numpy as np
import structlog

from speaker_adaptive.enums import Ablation
from speaker_adaptive.model.params import ModelParameters

logger = structlog.getLogger(__name__)

SurgeryFunc: TypeAlias = Callable[[ModelParameters], frozenset[str]]


class SurgeryRegistry:
    def __init__(self, surgeries: dict[Ablation, SurgeryFunc] | None = None) -> None:
        self.surgeries: dict[Ablation, SurgeryFunc] = {}

        if surgeries:
            for ablation, function in surgeries.items():
                self.add(ablation)(function)

    def add(self, ablation: Ablation) -> Callable[[SurgeryFunc], SurgeryFunc]:
        """A decorator to register the surgery for an ablation variant."""

        def decorator(func: SurgeryFunc) -> SurgeryFunc:
            logger.debug("Registering surgery for ablation '%s'", ablation.value)
            if ablation in self.surgeries:
                logger.warning("Overwriting surgery for ablation '%s'", ablation.value)
            self.surgeries[ablation] = func
            return func

        return decorator

    def apply(self, ablation: Ablation, params: ModelParameters) -> frozenset[str]:
        """Run the surgery in place and return the frozen parameter names."""
        try:
            surgery = self.surgeries[ablation]
        except KeyError:
            raise NotImplementedError(f"No surgery registered for {ablation}")
        frozen = surgery(params)
        logger.debug(
            "Applied '%s' surgery: %s frozen scalars",
            ablation.value,
            params.census(frozen),
        )
        return frozen

    def trainable(self, ablation: Ablation, params: ModelParameters) -> list[str]:
        frozen = self.apply(ablation, params)
        return [name for name in params if name not in frozen]


registry = SurgeryRegistry()


@registry.add(Ablation.FULL)
def keep_everything(params: ModelParameters) -> frozenset[str]:
    return frozenset()


@registry.add(Ablation.NO_FILM)
def pin_film_identity(params: ModelParameters) -> frozenset[str]:
    frozen = set()
    for m, block in params.film.blocks.items():
        params.assign(
            {
                f"film.{m}.w_gamma": np.zeros(block.w_gamma.shape),
                f"film.{m}.b_gamma": np.ones(block.b_gamma.shape),
                f"film.{m}.w_beta": np.zeros(block.w_beta.shape),
                f"film.{m}.b_beta": np.zeros(block.b_beta.shape),
            }
        )
        frozen |= {f"film.{m}.{p}" for p in ("w_gamma", "b_gamma", "w_beta", "b_beta")}
    return frozenset(frozen)


@registry.add(Ablation.NO_GATE)
def freeze_bypassed_gates(params: ModelParameters) -> frozenset[str]:
    # the forward pass bypasses the gate entirely; the parameters just stop training
    return frozenset(
        f"gate.{m}.{p}" for m in params.config.modalities for p in ("w", "b")
    )


@registry.add(Ablation.NO_AUX)
def detach_speaker_head(params: ModelParameters) -> frozenset[str]:
    return frozenset({"speaker_head.w", "speaker_head.b"})
