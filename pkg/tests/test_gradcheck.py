import numpy as np
import pytest

from speaker_adaptive.enums import Ablation
from speaker_adaptive.exceptions import ContractError, DeterminismError
from speaker_adaptive.gradcheck import (
    PRIMITIVE_POINTS,
    GradcheckResult,
    check_primitives,
    finite_difference_check,
    gradcheck_model_config,
    model_check,
    primitive_checks,
    run_gradcheck_suite,
)
from speaker_adaptive.tensor import Tensor, mul, tensor_sum

PRIMITIVES = list(primitive_checks(np.random.default_rng(0)))


@pytest.fixture(scope="module")
def primitive_results() -> dict[str, GradcheckResult]:
    return {r.name: r for r in check_primitives(np.random.default_rng(0))}


@pytest.mark.parametrize("name", PRIMITIVES)
def test_primitive_gradients(
    name: str, primitive_results: dict[str, GradcheckResult]
) -> None:
    result = primitive_results[name]
    assert result.passed, result
    _, params = primitive_checks(np.random.default_rng(0))[name]
    size = sum(t.size for t in params.values())
    assert result.checked == PRIMITIVE_POINTS * size


def test_primitive_points_must_be_positive() -> None:
    with pytest.raises(ContractError):
        check_primitives(np.random.default_rng(0), points=0)


@pytest.mark.parametrize("ablation", list(Ablation))
def test_model_gradients(ablation: Ablation) -> None:
    f, params = model_check(np.random.default_rng(1), seed=1, ablation=ablation)
    result = finite_difference_check(f, params, name="model", tolerance=1e-4)
    assert result.max_relative_error <= 1e-4, result
    assert result.checked == gradcheck_model_config().census()


def test_detects_wrong_gradient() -> None:
    x = Tensor([0.5, -1.5, 2.0], requires_grad=True)

    # the second factor hides its dependency on x from the graph
    def f() -> Tensor:
        return tensor_sum(mul(x, Tensor(x.data.copy())))

    result = finite_difference_check(f, {"x": x}, tolerance=1e-4)
    assert not result.passed
    assert result.max_relative_error == pytest.approx(0.5, rel=1e-6)
    assert result.worst_parameter == "x"


def test_constant_function_has_zero_error() -> None:
    x = Tensor([1.0, 2.0], requires_grad=True)
    result = finite_difference_check(lambda: Tensor(3.0), {"x": x}, tolerance=1e-12)
    assert result.passed
    assert result.max_relative_error == 0.0


def test_non_deterministic_function() -> None:
    rng = np.random.default_rng(0)
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(DeterminismError):
        finite_difference_check(
            lambda: tensor_sum(mul(x, Tensor(rng.standard_normal(2)))), {"x": x}
        )


@pytest.mark.parametrize("step", [0.0, -1e-5])
def test_step_must_be_positive(step: float) -> None:
    x = Tensor([1.0], requires_grad=True)
    with pytest.raises(ContractError):
        finite_difference_check(lambda: tensor_sum(x), {"x": x}, step)


def test_parameters_are_restored() -> None:
    x = Tensor([0.25, -0.75], requires_grad=True)
    before = x.data.copy()
    finite_difference_check(lambda: tensor_sum(mul(x, x)), {"x": x})
    np.testing.assert_array_equal(x.data, before)
    assert x.grad is None


def test_suite_passes() -> None:
    results = run_gradcheck_suite(seed=0)
    assert [r.name for r in results] == PRIMITIVES + ["model"]
    assert all(r.passed for r in results), [r for r in results if not r.passed]
