"""
Dense float64 tensors on a dynamic tape with reverse-mode differentiation.

A ``Graph`` records every forward operation together with its vector-Jacobian
product. ``Graph.backward`` walks the tape in reverse and writes parameter
gradients into the bound ``ParamStore``. Graphs are cheap and rebuilt for every
loss evaluation, so data-dependent decode lengths need no special handling.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from scasrec.core.errors import ContractError, DomainError, NumericError, ShapeError
from scasrec.diffengine.params import ParamStore

logger = logging.getLogger(__name__)

# Additive mask for excluded logits; finite so arithmetic stays finite.
MASK_VALUE = -1e9

Vjp = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """A float64 array produced by a graph operation."""

    __slots__ = ("data", "node_id", "requires_grad")

    def __init__(self, data: np.ndarray, node_id: int, requires_grad: bool):
        self.data = data
        self.node_id = node_id
        self.requires_grad = requires_grad

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    def item(self) -> float:
        """Value of a single-element tensor."""
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, shape is {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Copy of the underlying array."""
        return self.data.copy()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, node={self.node_id})"


@dataclass
class Node:
    """One recorded operation."""

    op: str
    inputs: Tuple[int, ...]
    output: Tensor
    vjp: Optional[Vjp] = None
    param_name: Optional[str] = None


def _as_array(value) -> np.ndarray:
    array = np.array(value, dtype=np.float64)
    if array.ndim == 0:
        array = array.reshape(1)
    return array


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Graph:
    """
    Tape of tensor operations bound to a parameter store.

    With ``record=False`` the graph only evaluates (no tape, no backward), which
    is what inference and finite-difference checks use.
    """

    def __init__(self, store: Optional[ParamStore] = None, record: bool = True):
        """
        Initialize graph.

        Args:
            store: Parameter store that ``param`` reads from and ``backward`` writes to
            record: Whether operations are recorded for differentiation
        """
        self.store = store
        self.record = record
        self.nodes: List[Node] = []
        self._params: Dict[str, Tensor] = {}

    # ------------------------------------------------------------------ leaves

    def _emit(
        self,
        op: str,
        inputs: Sequence[Tensor],
        data: np.ndarray,
        vjp: Optional[Vjp] = None,
        param_name: Optional[str] = None,
    ) -> Tensor:
        if not np.all(np.isfinite(data)):
            raise NumericError(f"non-finite output from {op} with shape {tuple(data.shape)}")
        if not self.record:
            return Tensor(data, -1, False)
        requires_grad = param_name is not None or any(t.requires_grad for t in inputs)
        tensor = Tensor(data, len(self.nodes), requires_grad)
        self.nodes.append(
            Node(
                op=op,
                inputs=tuple(t.node_id for t in inputs),
                output=tensor,
                vjp=vjp if requires_grad else None,
                param_name=param_name,
            )
        )
        return tensor

    def constant(self, value) -> Tensor:
        """Wrap a constant array (no gradient)."""
        return self._emit("constant", (), _as_array(value))

    def param(self, name: str) -> Tensor:
        """Leaf tensor for a named parameter of the bound store."""
        if self.store is None:
            raise ContractError("graph has no parameter store bound")
        cached = self._params.get(name)
        if cached is not None:
            return cached
        tensor = self._emit("param", (), self.store.value(name), param_name=name)
        self._params[name] = tensor
        return tensor

    # -------------------------------------------------------------- primitives

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        """Matrix product of two 2-D tensors."""
        if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError("matmul", [a.shape, b.shape])
        A, B = a.data, b.data
        return self._emit("matmul", (a, b), A @ B, lambda g: (g @ B.T, A.T @ g))

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        """Elementwise sum of equally shaped tensors."""
        if a.shape != b.shape:
            raise ShapeError("add", [a.shape, b.shape])
        return self._emit("add", (a, b), a.data + b.data, lambda g: (g, g))

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        """Elementwise difference of equally shaped tensors."""
        if a.shape != b.shape:
            raise ShapeError("sub", [a.shape, b.shape])
        return self._emit("sub", (a, b), a.data - b.data, lambda g: (g, -g))

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        """Elementwise product of equally shaped tensors."""
        if a.shape != b.shape:
            raise ShapeError("elementwise-mul", [a.shape, b.shape])
        A, B = a.data, b.data
        return self._emit("mul", (a, b), A * B, lambda g: (g * B, g * A))

    def _check_broadcast(self, op: str, a: Tensor, b: Tensor) -> None:
        try:
            target = np.broadcast_shapes(a.shape, b.shape)
        except ValueError:
            raise ShapeError(op, [a.shape, b.shape]) from None
        if tuple(target) != a.shape:
            raise ShapeError(op, [a.shape, b.shape])

    def broadcast_add(self, a: Tensor, b: Tensor) -> Tensor:
        """``a + b`` where ``b`` broadcasts onto the shape of ``a``."""
        self._check_broadcast("broadcast-add", a, b)
        b_shape = b.shape
        return self._emit(
            "broadcast_add", (a, b), a.data + b.data, lambda g: (g, _unbroadcast(g, b_shape))
        )

    def broadcast_mul(self, a: Tensor, b: Tensor) -> Tensor:
        """``a * b`` where ``b`` broadcasts onto the shape of ``a``."""
        self._check_broadcast("broadcast-mul", a, b)
        A, B = a.data, b.data
        return self._emit(
            "broadcast_mul",
            (a, b),
            A * B,
            lambda g: (g * B, _unbroadcast(g * A, B.shape)),
        )

    def scale(self, a: Tensor, factor: float) -> Tensor:
        """Multiply by a constant."""
        c = float(factor)
        return self._emit("scale", (a,), a.data * c, lambda g: (g * c,))

    def concat(self, tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
        """Concatenate tensors along ``axis``."""
        if not tensors:
            raise ContractError("concat needs at least one tensor")
        ndim = tensors[0].data.ndim
        axis = axis % ndim
        for t in tensors:
            same_rank = t.data.ndim == ndim
            if not same_rank or any(
                t.shape[d] != tensors[0].shape[d] for d in range(ndim) if d != axis
            ):
                raise ShapeError(f"concat(axis={axis})", [x.shape for x in tensors])
        sizes = [t.shape[axis] for t in tensors]
        splits = np.cumsum(sizes)[:-1]
        out = np.concatenate([t.data for t in tensors], axis=axis)
        return self._emit(
            "concat",
            tensors,
            out,
            lambda g: tuple(np.split(g, splits, axis=axis)),
        )

    def transpose(self, a: Tensor) -> Tensor:
        """Transpose of a 2-D tensor."""
        if a.data.ndim != 2:
            raise ShapeError("transpose", [a.shape])
        return self._emit("transpose", (a,), a.data.T.copy(), lambda g: (g.T,))

    def reshape(self, a: Tensor, shape: Tuple[int, ...]) -> Tensor:
        """Row-major reshape to ``shape`` (same element count)."""
        shape = tuple(int(d) for d in shape)
        if int(np.prod(shape)) != a.data.size:
            raise ShapeError("reshape", [a.shape, shape])
        original = a.shape
        return self._emit(
            "reshape", (a,), a.data.reshape(shape).copy(), lambda g: (g.reshape(original),)
        )

    def sigmoid(self, a: Tensor) -> Tensor:
        y = _stable_sigmoid(a.data)
        return self._emit("sigmoid", (a,), y, lambda g: (g * y * (1.0 - y),))

    def log_sigmoid(self, a: Tensor) -> Tensor:
        """``log(sigmoid(a))`` without underflow for large negative inputs."""
        A = a.data
        return self._emit(
            "log_sigmoid",
            (a,),
            -np.logaddexp(0.0, -A),
            lambda g: (g * (1.0 - _stable_sigmoid(A)),),
        )

    def tanh(self, a: Tensor) -> Tensor:
        y = np.tanh(a.data)
        return self._emit("tanh", (a,), y, lambda g: (g * (1.0 - y * y),))

    def softmax(self, a: Tensor) -> Tensor:
        """Softmax over the last axis."""
        shifted = a.data - a.data.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=-1, keepdims=True)
        return self._emit(
            "softmax",
            (a,),
            y,
            lambda g: (y * (g - (g * y).sum(axis=-1, keepdims=True)),),
        )

    def log(self, a: Tensor) -> Tensor:
        if np.any(a.data <= 0.0):
            raise DomainError(
                f"log of non-positive value (min {float(a.data.min())!r}) in tensor {a.shape}"
            )
        A = a.data
        return self._emit("log", (a,), np.log(A), lambda g: (g / A,))

    def sum(self, a: Tensor) -> Tensor:
        """Sum of all entries as a shape-[1] tensor."""
        shape = a.shape
        return self._emit(
            "sum",
            (a,),
            np.array([a.data.sum()]),
            lambda g: (np.full(shape, g[0]),),
        )

    def mean(self, a: Tensor) -> Tensor:
        """Mean of all entries as a shape-[1] tensor."""
        shape = a.shape
        size = a.data.size
        return self._emit(
            "mean",
            (a,),
            np.array([a.data.mean()]),
            lambda g: (np.full(shape, g[0] / size),),
        )

    def masked_add(self, a: Tensor, mask: np.ndarray) -> Tensor:
        """Add a constant mask (0 or ``MASK_VALUE`` entries) to ``a``."""
        mask = np.asarray(mask, dtype=np.float64)
        try:
            target = np.broadcast_shapes(a.shape, mask.shape)
        except ValueError:
            raise ShapeError("masked-add", [a.shape, mask.shape]) from None
        if tuple(target) != a.shape:
            raise ShapeError("masked-add", [a.shape, mask.shape])
        return self._emit("masked_add", (a,), a.data + mask, lambda g: (g,))

    def gather_rows(self, a: Tensor, rows: Sequence[int]) -> Tensor:
        """Rows ``rows`` of a 2-D tensor (repeats allowed)."""
        if a.data.ndim != 2:
            raise ShapeError("gather-rows", [a.shape])
        index = np.asarray(list(rows), dtype=np.int64)
        if index.size == 0:
            raise ContractError("gather_rows needs at least one row index")
        if index.min() < 0 or index.max() >= a.shape[0]:
            raise ContractError(f"row index out of range for {a.shape}: {index.tolist()}")
        shape = a.shape

        def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
            out = np.zeros(shape)
            np.add.at(out, index, g)
            return (out,)

        return self._emit("gather_rows", (a,), a.data[index], vjp)

    def pick(self, a: Tensor, index: Tuple[int, ...]) -> Tensor:
        """Single element ``a[index]`` as a shape-[1] tensor."""
        if len(index) != a.data.ndim:
            raise ShapeError("slice", [a.shape, (len(index),)])
        shape = a.shape

        def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
            out = np.zeros(shape)
            out[index] = g[0]
            return (out,)

        return self._emit("pick", (a,), np.array([a.data[index]]), vjp)

    def affine(self, x: Tensor, weight: str, bias: str) -> Tensor:
        """``x @ W + b`` with named parameters; ``b`` is a single row."""
        return self.broadcast_add(self.matmul(x, self.param(weight)), self.param(bias))

    # ----------------------------------------------------------------- backward

    def backward(self, loss: Tensor) -> None:
        """
        Differentiate ``loss`` and write parameter gradients into the store.

        Gradient accumulators are reset first, so parameters the loss does not
        reach end up with a zero gradient.

        Raises:
            ContractError: If ``loss`` is not a shape-[1] tensor of this graph
        """
        if not self.record:
            raise ContractError("backward on a graph built with record=False")
        if loss.shape != (1,):
            raise ContractError(f"backward needs a scalar loss of shape (1,), got {loss.shape}")
        if loss.node_id < 0 or loss.node_id >= len(self.nodes) or (
            self.nodes[loss.node_id].output is not loss
        ):
            raise ContractError("loss tensor does not belong to this graph")
        if self.store is None:
            raise ContractError("graph has no parameter store bound")

        self.store.zero_grad()
        if not loss.requires_grad:
            return

        grads: Dict[int, np.ndarray] = {loss.node_id: np.ones(1)}
        for node in reversed(self.nodes[: loss.node_id + 1]):
            g = grads.pop(node.output.node_id, None)
            if g is None:
                continue
            if node.param_name is not None:
                self.store.accumulate(node.param_name, g)
                continue
            if node.vjp is None:
                continue
            for input_id, input_grad in zip(node.inputs, node.vjp(g)):
                if input_grad is None or not self.nodes[input_id].output.requires_grad:
                    continue
                if input_id in grads:
                    grads[input_id] = grads[input_id] + input_grad
                else:
                    grads[input_id] = input_grad
