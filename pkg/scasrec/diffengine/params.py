"""Named parameter storage with gradient accumulators and Adam state."""

import logging
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from scasrec.core.errors import ContractError, ShapeError

logger = logging.getLogger(__name__)


class ParamEntry:
    """Value, gradient accumulator and Adam moments of one parameter."""

    __slots__ = ("value", "grad", "m", "v", "step")

    def __init__(self, value: np.ndarray):
        self.value = value
        self.grad = np.zeros_like(value)
        self.m = np.zeros_like(value)
        self.v = np.zeros_like(value)
        self.step = 0


class ParamStore:
    """
    Ordered mapping from parameter names to float64 arrays.

    Names are unique. Insertion order is the canonical iteration order used by
    checkpoints and gradient checking.
    """

    def __init__(self):
        self._entries: Dict[str, ParamEntry] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        """
        Register a parameter.

        Raises:
            ContractError: If the name is already taken
        """
        if name in self._entries:
            raise ContractError(f"duplicate parameter name: {name}")
        array = np.array(value, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1)
        self._entries[name] = ParamEntry(array)
        return array

    def add_random(
        self,
        rng: np.random.Generator,
        name: str,
        shape: Tuple[int, ...],
        scale: float = 1.0,
    ) -> np.ndarray:
        """Register a parameter with Glorot-style uniform initialization."""
        fan_in = shape[0] if len(shape) > 1 else 1
        fan_out = shape[-1]
        limit = scale * np.sqrt(6.0 / (fan_in + fan_out))
        return self.add(name, rng.uniform(-limit, limit, size=shape))

    def add_zeros(self, name: str, shape: Tuple[int, ...]) -> np.ndarray:
        return self.add(name, np.zeros(shape))

    def _entry(self, name: str) -> ParamEntry:
        try:
            return self._entries[name]
        except KeyError:
            raise ContractError(f"unknown parameter: {name}") from None

    def value(self, name: str) -> np.ndarray:
        return self._entry(name).value

    def grad(self, name: str) -> np.ndarray:
        return self._entry(name).grad

    def names(self, prefix: Optional[str] = None) -> List[str]:
        """Parameter names in insertion order, optionally filtered by prefix."""
        if prefix is None:
            return list(self._entries)
        return [n for n in self._entries if n.startswith(prefix)]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def size(self) -> int:
        """Total number of scalar parameters."""
        return int(sum(e.value.size for e in self._entries.values()))

    def zero_grad(self) -> None:
        for entry in self._entries.values():
            entry.grad.fill(0.0)

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        entry = self._entry(name)
        if grad.shape != entry.value.shape:
            raise ShapeError(f"gradient for {name}", [entry.value.shape, grad.shape])
        entry.grad += grad

    def snapshot(self) -> Dict[str, np.ndarray]:
        """Copies of all parameter values."""
        return {name: e.value.copy() for name, e in self._entries.items()}

    def load_values(self, values: Dict[str, np.ndarray]) -> None:
        """
        Overwrite parameter values in place.

        Raises:
            ContractError: If names differ from the registered set
            ShapeError: If a shape differs
        """
        missing = [n for n in self._entries if n not in values]
        extra = [n for n in values if n not in self._entries]
        if missing or extra:
            raise ContractError(f"parameter set mismatch: missing={missing} unexpected={extra}")
        for name, entry in self._entries.items():
            array = np.asarray(values[name], dtype=np.float64)
            if array.shape != entry.value.shape:
                raise ShapeError(f"load {name}", [entry.value.shape, array.shape])
            entry.value[...] = array

    def optimizer_state(self) -> Dict[str, np.ndarray]:
        """Adam moments and step counters keyed by ``adam/<kind>/<name>``."""
        state: Dict[str, np.ndarray] = {}
        for name, entry in self._entries.items():
            state[f"adam/m/{name}"] = entry.m.copy()
            state[f"adam/v/{name}"] = entry.v.copy()
            state[f"adam/step/{name}"] = np.array([float(entry.step)])
        return state

    def load_optimizer_state(self, state: Dict[str, np.ndarray]) -> None:
        """Restore Adam state written by ``optimizer_state``; absent entries stay fresh."""
        for name, entry in self._entries.items():
            m = state.get(f"adam/m/{name}")
            v = state.get(f"adam/v/{name}")
            step = state.get(f"adam/step/{name}")
            if m is None or v is None or step is None:
                continue
            if m.shape != entry.value.shape or v.shape != entry.value.shape:
                raise ShapeError(f"adam state {name}", [entry.value.shape, m.shape, v.shape])
            entry.m[...] = m
            entry.v[...] = v
            entry.step = int(step.reshape(-1)[0])


def adam_step(
    store: ParamStore,
    learning_rate: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> ParamStore:
    """
    Apply one bias-corrected Adam update to every parameter and clear gradients.

    Each parameter keeps its own step counter, so parameters added later start
    their bias correction from the first update they receive.
    """
    if learning_rate <= 0:
        raise ContractError(f"learning rate must be positive, got {learning_rate}")
    for name in store:
        entry = store._entry(name)
        g = entry.grad
        entry.step += 1
        entry.m = beta1 * entry.m + (1.0 - beta1) * g
        entry.v = beta2 * entry.v + (1.0 - beta2) * g * g
        m_hat = entry.m / (1.0 - beta1**entry.step)
        v_hat = entry.v / (1.0 - beta2**entry.step)
        entry.value -= learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        entry.grad.fill(0.0)
    return store
