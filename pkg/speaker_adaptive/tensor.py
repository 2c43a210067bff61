"""
Dense float64 tensors with define-by-run reverse-mode differentiation.

Every operation records its inputs and a closure that pushes the output gradient back
to them. `backward` sorts the recorded graph topologically and runs the closures in
reverse. Only one broadcast rule exists: a vector applied to every row of a matrix.
"""

from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, Sequence

import numpy as np
import structlog

from speaker_adaptive.exceptions import ContractError, DimensionError, GraphStateError

logger = structlog.getLogger(__name__)

ArrayLike = np.ndarray | Sequence | float | int

# open interval bounds for the logistic output
_SIGMOID_HIGH = np.nextafter(1.0, 0.0)
_SIGMOID_LOW = np.finfo(np.float64).tiny

RMS_EPS = 1e-5

BackwardFn = Callable[[np.ndarray], None]


class Tensor:
    def __init__(
        self,
        data: ArrayLike,
        *,
        requires_grad: bool = False,
        name: str = "",
        _parents: tuple["Tensor", ...] = (),
        _op: str = "leaf",
    ) -> None:
        array = np.array(data, dtype=np.float64)
        if any(dim <= 0 for dim in array.shape):
            raise DimensionError(
                f"Tensor dimensions must be positive, got {array.shape}"
            )
        self.data: np.ndarray = array
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = _parents
        self._op = _op
        self._backward: BackwardFn | None = None
        self._consumed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(
                f"item() needs a single-element tensor, got {self.shape}"
            )
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self._op}{label})"


def _result(
    data: np.ndarray,
    parents: tuple[Tensor, ...],
    op: str,
    backward_fn: BackwardFn,
) -> Tensor:
    requires_grad = any(p.requires_grad for p in parents)
    out = Tensor(
        data,
        requires_grad=requires_grad,
        _parents=parents if requires_grad else (),
        _op=op,
    )
    if requires_grad:
        out._backward = backward_fn
    return out


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if not tensor.requires_grad:
        return
    if tensor.grad is None:
        tensor.grad = np.array(grad, dtype=np.float64, copy=True)
    else:
        tensor.grad = tensor.grad + grad


def _is_row_broadcast(a: Tensor, b: Tensor) -> bool:
    return a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul cannot compose {a.shape} with {b.shape}")
    out_data = a.data @ b.data

    def _backward(grad: np.ndarray) -> None:
        _accumulate(a, grad @ b.data.T)
        _accumulate(b, a.data.T @ grad)

    return _result(out_data, (a, b), "matmul", _backward)


def elementwise(op: Literal["add", "sub", "mul"], a: Tensor, b: Tensor) -> Tensor:
    if a.shape == b.shape:
        broadcast = False
    elif _is_row_broadcast(a, b):
        broadcast = True
    else:
        raise DimensionError(f"{op} cannot broadcast {b.shape} onto {a.shape}")

    def _reduce(grad: np.ndarray) -> np.ndarray:
        return grad.sum(axis=0) if broadcast else grad

    match op:
        case "add":
            out_data = a.data + b.data

            def _backward(grad: np.ndarray) -> None:
                _accumulate(a, grad)
                _accumulate(b, _reduce(grad))

        case "sub":
            out_data = a.data - b.data

            def _backward(grad: np.ndarray) -> None:
                _accumulate(a, grad)
                _accumulate(b, _reduce(-grad))

        case "mul":
            out_data = a.data * b.data

            def _backward(grad: np.ndarray) -> None:
                _accumulate(a, grad * b.data)
                _accumulate(b, _reduce(grad * a.data))

        case _:
            raise ContractError(f"Unknown elementwise operation {op!r}")

    return _result(out_data, (a, b), op, _backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    return elementwise("add", a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return elementwise("sub", a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return elementwise("mul", a, b)


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    """Branch-form logistic, clipped to the open interval (0, 1)."""
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return np.clip(out, _SIGMOID_LOW, _SIGMOID_HIGH)


def sigmoid(x: Tensor) -> Tensor:
    out_data = stable_sigmoid(x.data)

    def _backward(grad: np.ndarray) -> None:
        _accumulate(x, grad * out_data * (1.0 - out_data))

    return _result(out_data, (x,), "sigmoid", _backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def _backward(grad: np.ndarray) -> None:
        _accumulate(x, grad * mask)

    return _result(np.where(mask, x.data, 0.0), (x,), "relu", _backward)


def rms_normalize(x: Tensor, eps: float = RMS_EPS) -> Tensor:
    """Each row divided by its root mean square: x / sqrt(mean(x^2) + eps)."""
    if eps <= 0:
        raise ContractError(f"eps must be positive, got {eps}")
    rms = np.sqrt(np.mean(x.data * x.data, axis=-1, keepdims=True) + eps)
    out_data = x.data / rms

    def _backward(grad: np.ndarray) -> None:
        projected = np.mean(grad * out_data, axis=-1, keepdims=True)
        _accumulate(x, (grad - out_data * projected) / rms)

    return _result(out_data, (x,), "rms_normalize", _backward)


def scale(x: Tensor, factor: float) -> Tensor:
    factor = float(factor)

    def _backward(grad: np.ndarray) -> None:
        _accumulate(x, grad * factor)

    return _result(x.data * factor, (x,), "scale", _backward)


def tensor_sum(x: Tensor) -> Tensor:
    def _backward(grad: np.ndarray) -> None:
        _accumulate(x, np.broadcast_to(grad, x.shape))

    return _result(np.array(x.data.sum()), (x,), "sum", _backward)


def tensor_mean(x: Tensor) -> Tensor:
    n = x.size

    def _backward(grad: np.ndarray) -> None:
        _accumulate(x, np.broadcast_to(grad / n, x.shape))

    return _result(np.array(x.data.mean()), (x,), "mean", _backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        out_data = x.data.reshape(shape)
    except ValueError as e:
        raise DimensionError(f"Cannot reshape {x.shape} to {shape}") from e

    def _backward(grad: np.ndarray) -> None:
        _accumulate(x, grad.reshape(x.shape))

    return _result(out_data, (x,), "reshape", _backward)


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last (feature) axis."""
    if not tensors:
        raise ContractError("concat needs at least one tensor")
    leading = {t.shape[:-1] for t in tensors}
    if len(leading) != 1:
        raise DimensionError(
            f"concat needs matching leading dims, got {[t.shape for t in tensors]}"
        )
    widths = [t.shape[-1] for t in tensors]
    boundaries = np.cumsum(widths)[:-1]
    out_data = np.concatenate([t.data for t in tensors], axis=-1)

    def _backward(grad: np.ndarray) -> None:
        for tensor, piece in zip(tensors, np.split(grad, boundaries, axis=-1)):
            _accumulate(tensor, piece)

    return _result(out_data, tuple(tensors), "concat", _backward)


def take_rows(table: Tensor, indices: Sequence[int] | np.ndarray) -> Tensor:
    """Gather rows of a matrix; the gradient scatters back into the gathered rows."""
    if table.ndim != 2:
        raise DimensionError(f"take_rows needs a matrix, got {table.shape}")
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        raise ContractError("take_rows needs at least one index")
    if idx.min() < 0 or idx.max() >= table.shape[0]:
        raise IndexError(
            f"Row index out of range [0, {table.shape[0]}): "
            f"min={idx.min()} max={idx.max()}"
        )

    def _backward(grad: np.ndarray) -> None:
        scattered = np.zeros_like(table.data)
        np.add.at(scattered, idx, grad)
        _accumulate(table, scattered)

    return _result(table.data[idx], (table,), "take_rows", _backward)


def detach(x: Tensor) -> Tensor:
    return Tensor(x.data, requires_grad=False, name=x.name)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def softmax_cross_entropy(
    logits: Tensor,
    targets: Sequence[int] | np.ndarray,
    class_weights: Sequence[float] | np.ndarray | None = None,
) -> Tensor:
    """Batch mean of the (optionally class-weighted) negative log-softmax of targets."""
    if logits.ndim != 2:
        raise DimensionError(f"logits must be batch x classes, got {logits.shape}")
    batch, classes = logits.shape
    target_idx = np.asarray(targets, dtype=np.int64).reshape(-1)
    if target_idx.shape[0] != batch:
        raise DimensionError(
            f"{target_idx.shape[0]} targets for a batch of {batch} logit rows"
        )
    if target_idx.min() < 0 or target_idx.max() >= classes:
        raise IndexError(f"Target index out of range [0, {classes})")
    if class_weights is None:
        weights = np.ones(classes)
    else:
        weights = np.asarray(class_weights, dtype=np.float64)
        if weights.shape != (classes,):
            raise DimensionError(
                f"class_weights has shape {weights.shape}, expected ({classes},)"
            )
        if np.any(weights <= 0):
            raise ContractError("class_weights must be strictly positive")

    rows = np.arange(batch)
    log_probs = log_softmax(logits.data)
    sample_weights = weights[target_idx]
    loss = -(sample_weights * log_probs[rows, target_idx]).sum() / batch

    def _backward(grad: np.ndarray) -> None:
        local = np.exp(log_probs)
        local[rows, target_idx] -= 1.0
        local *= sample_weights[:, None] / batch
        _accumulate(logits, grad * local)

    return _result(np.array(loss), (logits,), "softmax_cross_entropy", _backward)


@dataclass
class GraphNode:
    output: Tensor
    inputs: tuple[Tensor, ...]
    op: str


@dataclass
class ComputeGraph:
    """Operation records in topological order: every node's inputs precede it."""

    nodes: list[GraphNode] = field(default_factory=list)

    @classmethod
    def from_output(cls, output: Tensor) -> "ComputeGraph":
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(output, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited or not tensor.requires_grad:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            stack.extend((parent, False) for parent in reversed(tensor._parents))
        return cls(nodes=[GraphNode(t, t._parents, t._op) for t in order])

    def leaves(self) -> list[Tensor]:
        return [node.output for node in self.nodes if not node.inputs]

    def __len__(self) -> int:
        return len(self.nodes)


def backward(loss: Tensor) -> ComputeGraph:
    """Populate `grad` of every requires_grad leaf reachable from a scalar loss."""
    if loss.ndim != 0 and loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise GraphStateError(
            "backward was already run on this loss; re-run the forward pass first"
        )
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any tensor that requires grad")

    graph = ComputeGraph.from_output(loss)
    for node in graph.nodes:
        if node.inputs:
            node.output.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(graph.nodes):
        tensor = node.output
        if tensor._backward is not None and tensor.grad is not None:
            tensor._backward(tensor.grad)
    loss._consumed = True
    logger.debug("backward swept %s nodes", len(graph))
    return graph


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for tensor in tensors:
        tensor.zero_grad()
