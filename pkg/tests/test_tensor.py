import numpy as np
import pytest

from speaker_adaptive.exceptions import ContractError, DimensionError, GraphStateError
from speaker_adaptive.tensor import (
    ComputeGraph,
    Tensor,
    add,
    backward,
    concat,
    detach,
    matmul,
    mul,
    relu,
    rms_normalize,
    sigmoid,
    softmax,
    softmax_cross_entropy,
    take_rows,
    tensor_sum,
)


def test_matmul_identity() -> None:
    out = matmul(Tensor([[1.0, 0.0], [0.0, 1.0]]), Tensor([[5.0], [7.0]]))
    assert out.data.tolist() == [[5.0], [7.0]]


def test_matmul_shape_mismatch_names_both_shapes() -> None:
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_matmul_gradients() -> None:
    a = Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
    b = Tensor([[1.0], [-1.0]], requires_grad=True)
    backward(tensor_sum(matmul(a, b)))
    np.testing.assert_array_equal(a.grad, [[1.0, -1.0], [1.0, -1.0]])
    np.testing.assert_array_equal(b.grad, [[4.0], [6.0]])


def test_row_broadcast_reduces_gradient() -> None:
    x = Tensor(np.ones((3, 2)), requires_grad=True)
    row = Tensor([1.0, 2.0], requires_grad=True)
    out = add(x, row)
    assert out.data.tolist() == [[2.0, 3.0]] * 3
    backward(tensor_sum(out))
    np.testing.assert_array_equal(row.grad, [3.0, 3.0])


@pytest.mark.parametrize(
    ("a_shape", "b_shape"),
    [
        ((2, 3), (2,)),
        ((3,), (2, 3)),
        ((2, 3), (3, 2)),
    ],
)
def test_unsupported_broadcast(a_shape: tuple, b_shape: tuple) -> None:
    with pytest.raises(DimensionError):
        mul(Tensor(np.ones(a_shape)), Tensor(np.ones(b_shape)))


def test_sigmoid_stays_in_open_interval() -> None:
    out = sigmoid(Tensor([1000.0, -1000.0, 0.0, 40.0, -800.0]))
    assert np.all(np.isfinite(out.data))
    assert np.all(out.data > 0.0)
    assert np.all(out.data < 1.0)
    assert out.data[2] == 0.5


def test_relu_gradient_mask() -> None:
    x = Tensor([-1.0, 2.0, -3.0, 4.0], requires_grad=True)
    backward(tensor_sum(relu(x)))
    np.testing.assert_array_equal(x.grad, [0.0, 1.0, 0.0, 1.0])


def test_cross_entropy_uniform_logits() -> None:
    loss = softmax_cross_entropy(Tensor(np.zeros((2, 4))), [0, 3])
    assert loss.item() == pytest.approx(np.log(4.0), abs=1e-15)


def test_cross_entropy_is_stable_for_large_logits() -> None:
    logits = Tensor([[1000.0, -1000.0, 0.0], [-1e4, 1e4, 0.0]], requires_grad=True)
    loss = softmax_cross_entropy(logits, [0, 0])
    assert np.isfinite(loss.item())
    assert loss.item() == pytest.approx(1e4, rel=1e-12)
    backward(loss)
    assert np.all(np.isfinite(logits.grad))


def test_cross_entropy_class_weights() -> None:
    logits = Tensor(np.zeros((2, 2)))
    weighted = softmax_cross_entropy(logits, [0, 1], class_weights=[3.0, 1.0])
    assert weighted.item() == pytest.approx(2.0 * np.log(2.0))


@pytest.mark.parametrize(
    ("targets", "weights", "error"),
    [
        ([0, 5], None, IndexError),
        ([0], None, DimensionError),
        ([0, 1], [1.0, 1.0], DimensionError),
        ([0, 1], [1.0, 0.0, 1.0], ContractError),
    ],
)
def test_cross_entropy_rejects(
    targets: list, weights: list | None, error: type
) -> None:
    with pytest.raises(error):
        softmax_cross_entropy(Tensor(np.zeros((2, 3))), targets, weights)


def test_shared_input_accumulates() -> None:
    x = Tensor([1.0, 2.0], requires_grad=True)
    backward(tensor_sum(add(x, x)))
    np.testing.assert_array_equal(x.grad, [2.0, 2.0])


def test_take_rows_scatters_repeated_indices() -> None:
    table = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
    out = take_rows(table, [2, 0, 2])
    assert out.data.tolist() == [[4.0, 5.0], [0.0, 1.0], [4.0, 5.0]]
    backward(tensor_sum(out))
    np.testing.assert_array_equal(table.grad, [[1.0, 1.0], [0.0, 0.0], [2.0, 2.0]])


def test_take_rows_out_of_range() -> None:
    with pytest.raises(IndexError):
        take_rows(Tensor(np.ones((3, 2))), [3])


def test_concat_splits_gradient() -> None:
    u = Tensor(np.ones((2, 1)), requires_grad=True)
    v = Tensor(np.ones((2, 2)), requires_grad=True)
    weights = Tensor([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    backward(tensor_sum(mul(concat([u, v]), weights)))
    np.testing.assert_array_equal(u.grad, [[1.0], [4.0]])
    np.testing.assert_array_equal(v.grad, [[2.0, 3.0], [5.0, 6.0]])


def test_detach_blocks_gradient() -> None:
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = Tensor([3.0, 4.0], requires_grad=True)
    backward(tensor_sum(mul(detach(x), y)))
    assert x.grad is None
    np.testing.assert_array_equal(y.grad, [1.0, 2.0])


def test_second_backward_is_rejected() -> None:
    x = Tensor([1.0, 2.0], requires_grad=True)
    loss = tensor_sum(mul(x, x))
    backward(loss)
    with pytest.raises(GraphStateError):
        backward(loss)


def test_backward_needs_scalar() -> None:
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ContractError):
        backward(mul(x, x))


def test_backward_needs_grad_path() -> None:
    with pytest.raises(ContractError):
        backward(tensor_sum(Tensor([1.0, 2.0])))


def test_graph_is_topologically_ordered() -> None:
    rng = np.random.default_rng(0)
    a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    b = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
    row = Tensor(rng.standard_normal(2), requires_grad=True)
    hidden = relu(add(matmul(a, b), row))
    loss = tensor_sum(mul(sigmoid(hidden), hidden))
    graph = ComputeGraph.from_output(loss)

    position = {id(node.output): i for i, node in enumerate(graph.nodes)}
    for i, node in enumerate(graph.nodes):
        for parent in node.inputs:
            if parent.requires_grad:
                assert position[id(parent)] < i
    assert graph.nodes[-1].output is loss
    assert {id(t) for t in graph.leaves()} == {id(a), id(b), id(row)}


@pytest.mark.parametrize("shape", [(0,), (2, 0)])
def test_empty_dimensions_rejected(shape: tuple) -> None:
    with pytest.raises(DimensionError):
        Tensor(np.zeros(shape))


def test_item_needs_single_element() -> None:
    with pytest.raises(ContractError):
        Tensor([1.0, 2.0]).item()


def test_softmax_rows_sum_to_one() -> None:
    rng = np.random.default_rng(4)
    logits = rng.standard_normal((6, 5)) * 30.0
    logits[0] = [800.0, -800.0, 0.0, 1.0, 2.0]
    probabilities = softmax(logits)
    assert np.isfinite(probabilities).all()
    assert (probabilities >= 0).all()
    np.testing.assert_allclose(probabilities.sum(axis=1), 1.0, rtol=0, atol=1e-12)
    assert (probabilities.argmax(axis=1) == logits.argmax(axis=1)).all()


def test_rms_normalize_has_unit_rms() -> None:
    rng = np.random.default_rng(5)
    x = Tensor(rng.standard_normal((4, 6)) * 7.0)
    out = rms_normalize(x).data
    np.testing.assert_allclose(np.sqrt(np.mean(out**2, axis=1)), 1.0, atol=1e-6)


def test_rms_normalize_ignores_row_scale() -> None:
    rng = np.random.default_rng(6)
    rows = rng.standard_normal((3, 5))
    scaled = rows * np.array([[2.0], [4.0], [20.0]])
    np.testing.assert_allclose(
        rms_normalize(Tensor(rows)).data,
        rms_normalize(Tensor(scaled)).data,
        rtol=1e-4,
    )


def test_rms_normalize_needs_positive_eps() -> None:
    with pytest.raises(ContractError):
        rms_normalize(Tensor([[1.0, 2.0]]), eps=0.0)


def _gradients_of_fresh_graph(seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    a = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
    w = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    b = Tensor(rng.standard_normal(3), requires_grad=True)
    logits = add(matmul(rms_normalize(relu(a)), w), b)
    loss = softmax_cross_entropy(sigmoid(logits), [0, 2, 1, 1, 0])
    backward(loss)
    return [a.grad, w.grad, b.grad]


def test_backward_is_bit_reproducible() -> None:
    first = _gradients_of_fresh_graph(11)
    second = _gradients_of_fresh_graph(11)
    for left, right in zip(first, second, strict=True):
        assert left.tobytes() == right.tobytes()
