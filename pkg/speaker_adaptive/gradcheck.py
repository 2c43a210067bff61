"""
Central finite differences against the analytic gradients of `tensor`.
"""

from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np
import structlog

from speaker_adaptive.core.timing import log_timing
from speaker_adaptive.data.corpus import Dialogue, Utterance
from speaker_adaptive.enums import Ablation
from speaker_adaptive.exceptions import ContractError, DeterminismError
from speaker_adaptive.model.forward import compute_loss, make_batch
from speaker_adaptive.model.params import ModelConfig, init_model
from speaker_adaptive.tensor import (
    Tensor,
    add,
    backward,
    concat,
    matmul,
    mul,
    relu,
    reshape,
    rms_normalize,
    scale,
    sigmoid,
    softmax_cross_entropy,
    sub,
    take_rows,
    tensor_mean,
    tensor_sum,
    zero_grads,
)

logger = structlog.getLogger(__name__)

ABS_FLOOR = 1e-8
# random evaluation points per primitive
PRIMITIVE_POINTS = 10
# primitive gradients smaller than this are compared absolutely; at step 1e-5 the
# roundoff in a central difference is near 1e-10
PRIMITIVE_ABS_FLOOR = 1e-4


@dataclass(frozen=True)
class GradcheckResult:
    name: str
    max_relative_error: float
    worst_parameter: str | None
    worst_index: int | None
    checked: int
    tolerance: float | None = None

    @property
    def passed(self) -> bool:
        return self.tolerance is None or self.max_relative_error <= self.tolerance


def _error(analytic: float, numeric: float, abs_floor: float) -> float:
    magnitude = max(abs(analytic), abs(numeric))
    difference = abs(analytic - numeric)
    return difference if magnitude < abs_floor else difference / magnitude


def finite_difference_check(
    f: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    step: float = 1e-5,
    *,
    name: str = "check",
    tolerance: float | None = None,
    abs_floor: float = ABS_FLOOR,
) -> GradcheckResult:
    """
    Compare the backward pass of `f` with (f(x+h) - f(x-h)) / 2h for every scalar of
    every tensor in `params`.

    `f` rebuilds the scalar loss from the current parameter values each call; the
    parameters are perturbed in place and restored.
    """
    if step <= 0:
        raise ContractError(f"Finite-difference step must be positive, got {step}")
    tensors = list(params.values())
    zero_grads(tensors)
    loss = f()
    baseline = loss.item()
    if loss.requires_grad:
        backward(loss)
    analytic = {
        key: t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
        for key, t in params.items()
    }
    if f().item() != baseline:
        raise DeterminismError(f"{name}: repeated evaluation changed the loss")

    worst, worst_name, worst_index, checked = 0.0, None, None, 0
    for key, tensor in params.items():
        flat = tensor.data.reshape(-1)
        grad = analytic[key].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            plus = f().item()
            flat[i] = original - step
            minus = f().item()
            flat[i] = original
            error = _error(grad[i], (plus - minus) / (2.0 * step), abs_floor)
            checked += 1
            if error > worst or worst_name is None:
                worst, worst_name, worst_index = error, key, i
    zero_grads(tensors)
    return GradcheckResult(
        name=name,
        max_relative_error=worst,
        worst_parameter=worst_name,
        worst_index=worst_index,
        checked=checked,
        tolerance=tolerance,
    )


def _leaf(rng: np.random.Generator, *shape: int, name: str) -> Tensor:
    return Tensor(rng.standard_normal(shape), requires_grad=True, name=name)


def _away_from_kink(rng: np.random.Generator, *shape: int, name: str) -> Tensor:
    x = rng.standard_normal(shape)
    return Tensor(x + np.sign(x) * 0.1, requires_grad=True, name=name)


def primitive_checks(
    rng: np.random.Generator,
) -> dict[str, tuple[Callable[[], Tensor], dict[str, Tensor]]]:
    """Each primitive projected to a scalar through a fixed random weighting."""

    def weighted(x: Tensor) -> Tensor:
        weights = Tensor(np.random.default_rng(x.size).standard_normal(x.shape))
        return tensor_sum(mul(x, weights))

    a, b = _leaf(rng, 3, 4, name="a"), _leaf(rng, 4, 2, name="b")
    p, q = _leaf(rng, 2, 3, name="p"), _leaf(rng, 2, 3, name="q")
    row = _leaf(rng, 3, name="row")
    s = _leaf(rng, 3, 4, name="s")
    z = _away_from_kink(rng, 3, 4, name="z")
    logits = _leaf(rng, 4, 6, name="logits")
    targets = rng.integers(6, size=4)
    class_weights = rng.uniform(0.5, 2.0, size=6)
    table = _leaf(rng, 5, 3, name="table")
    u, v = _leaf(rng, 2, 3, name="u"), _leaf(rng, 2, 2, name="v")
    rows = _leaf(rng, 3, 5, name="rows")

    return {
        "matmul": (lambda: weighted(matmul(a, b)), {"a": a, "b": b}),
        "mul": (lambda: weighted(mul(p, q)), {"p": p, "q": q}),
        "add_row_broadcast": (lambda: weighted(add(p, row)), {"p": p, "row": row}),
        "sub": (lambda: weighted(sub(p, q)), {"p": p, "q": q}),
        "sigmoid": (lambda: weighted(sigmoid(s)), {"s": s}),
        "relu": (lambda: weighted(relu(z)), {"z": z}),
        "softmax_cross_entropy": (
            lambda: softmax_cross_entropy(logits, targets, class_weights),
            {"logits": logits},
        ),
        "take_rows": (
            lambda: weighted(take_rows(table, [4, 0, 4, 2])),
            {"table": table},
        ),
        "concat": (lambda: weighted(concat([u, v])), {"u": u, "v": v}),
        "rms_normalize": (lambda: weighted(rms_normalize(rows)), {"rows": rows}),
        "reshape_scale_mean": (
            lambda: tensor_mean(scale(reshape(s, (4, 3)), -1.5)),
            {"s": s},
        ),
    }


def check_primitives(
    rng: np.random.Generator,
    points: int = PRIMITIVE_POINTS,
    step: float = 1e-5,
    tolerance: float = 1e-6,
) -> list[GradcheckResult]:
    """Every primitive at `points` independent random inputs; one result each."""
    if points < 1:
        raise ContractError(f"Need at least one evaluation point, got {points}")
    per_name: dict[str, list[GradcheckResult]] = {}
    for _ in range(points):
        for name, (f, params) in primitive_checks(rng).items():
            result = finite_difference_check(
                f,
                params,
                step,
                name=name,
                tolerance=tolerance,
                abs_floor=PRIMITIVE_ABS_FLOOR,
            )
            per_name.setdefault(name, []).append(result)
    merged = []
    for name, results in per_name.items():
        worst = max(results, key=lambda r: r.max_relative_error)
        merged.append(replace(worst, checked=sum(r.checked for r in results)))
    return merged


def gradcheck_model_config() -> ModelConfig:
    return ModelConfig(
        num_speakers=3,
        num_emotions=3,
        modality_dims={"audio": 4, "visual": 4},
        d_spk=4,
        d_h=6,
        window=2,
    )


def model_check(
    rng: np.random.Generator, seed: int, ablation: Ablation = Ablation.FULL
) -> tuple[Callable[[], Tensor], dict[str, Tensor]]:
    """Training loss of a small model, moved off its identity initialization."""
    config = gradcheck_model_config()
    params = init_model(config, seed)
    params.assign(
        {
            name: value + 0.3 * rng.standard_normal(value.shape)
            for name, value in params.arrays().items()
        }
    )
    dialogues = [
        Dialogue(
            dialogue_id=d,
            utterances=tuple(
                Utterance(
                    speaker_id=int(rng.integers(config.num_speakers)),
                    emotion=int(rng.integers(config.num_emotions)),
                    features={
                        m: rng.standard_normal(width)
                        for m, width in config.modality_dims.items()
                    },
                    position=i,
                )
                for i in range(5)
            ),
        )
        for d in range(3)
    ]
    oov_mask = np.zeros(15, dtype=bool)
    oov_mask[7] = True
    batch = make_batch(
        dialogues,
        config.modalities,
        config.window,
        num_speakers=config.num_speakers,
        oov_mask=oov_mask,
    )
    class_weights = rng.uniform(0.5, 2.0, size=config.num_emotions)

    def loss() -> Tensor:
        return compute_loss(params, batch, 0.5, ablation, class_weights)[1].total

    return loss, dict(params)


@log_timing
def run_gradcheck_suite(
    seed: int = 0,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    primitive_tolerance: float = 1e-6,
) -> list[GradcheckResult]:
    rng = np.random.default_rng(seed)
    results = check_primitives(rng, step=step, tolerance=primitive_tolerance)
    f, params = model_check(rng, seed)
    results.append(
        finite_difference_check(f, params, step, name="model", tolerance=tolerance)
    )
    for result in results:
        log = logger.info if result.passed else logger.error
        log(
            "gradcheck %s: max relative error %.3g over %s scalars",
            result.name,
            result.max_relative_error,
            result.checked,
            worst_parameter=result.worst_parameter,
        )
    return results
