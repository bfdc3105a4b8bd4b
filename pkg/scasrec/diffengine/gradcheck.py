"""Central-difference gradient verification."""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from scasrec.core.errors import ContractError, DeterminismError
from scasrec.diffengine.params import ParamStore
from scasrec.diffengine.tensor import Graph, Tensor

logger = logging.getLogger(__name__)

LossFn = Callable[[Graph], Tensor]


@dataclass
class GradCheckResult:
    """Outcome of a gradient check."""

    max_rel_error: float
    worst_param: Optional[str]
    worst_index: Optional[Tuple[int, ...]]
    tolerance: float
    checked: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def _evaluate(f: LossFn, store: ParamStore) -> float:
    return f(Graph(store, record=False)).item()


def grad_check(
    f: LossFn,
    store: ParamStore,
    h: float = 1e-5,
    tolerance: float = 1e-4,
    atol: float = 1e-9,
    params: Optional[Sequence[str]] = None,
    max_elements: Optional[int] = None,
    seed: int = 0,
    analytic_hook: Optional[Callable[[Dict[str, np.ndarray]], None]] = None,
) -> GradCheckResult:
    """
    Compare analytic gradients of ``f`` with central differences.

    ``f`` receives a fresh graph bound to ``store`` and must return a shape-[1]
    loss. Relative error per element is ``|a - c| / max(|a|, |c|, 1e-8)``; an
    element whose absolute difference is at most ``atol`` counts as exact.

    Args:
        f: Loss builder
        store: Parameters to perturb (restored afterwards)
        h: Finite-difference step
        tolerance: Pass threshold on the maximum relative error
        atol: Absolute difference treated as zero error
        params: Parameter names to check (None = all)
        max_elements: Check at most this many random elements per parameter
        seed: Seed for element sampling
        analytic_hook: Called with the analytic gradients before comparison

    Raises:
        DeterminismError: If two evaluations at the same point differ
    """
    if h <= 0:
        raise ContractError(f"finite-difference step must be positive, got {h}")

    graph = Graph(store)
    loss = f(graph)
    base = loss.item()
    graph.backward(loss)
    names: List[str] = list(params) if params is not None else store.names()
    analytic = {name: store.grad(name).copy() for name in names}
    if analytic_hook is not None:
        analytic_hook(analytic)

    again = _evaluate(f, store)
    if again != base:
        raise DeterminismError(f"loss changed between identical evaluations: {base!r} vs {again!r}")

    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_param: Optional[str] = None
    worst_index: Optional[Tuple[int, ...]] = None
    checked = 0

    for name in names:
        value = store.value(name)
        indices = list(np.ndindex(value.shape))
        if max_elements is not None and len(indices) > max_elements:
            chosen = rng.choice(len(indices), size=max_elements, replace=False)
            indices = [indices[i] for i in sorted(chosen)]
        for index in indices:
            original = value[index]
            try:
                value[index] = original + h
                f_plus = _evaluate(f, store)
                value[index] = original - h
                f_minus = _evaluate(f, store)
            finally:
                value[index] = original
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(analytic[name][index])
            diff = abs(a - numeric)
            rel = 0.0 if diff <= atol else diff / max(abs(a), abs(numeric), 1e-8)
            checked += 1
            if rel > worst:
                worst, worst_param, worst_index = rel, name, tuple(int(i) for i in index)

    logger.debug("grad check: %d elements, max rel error %.3e (%s)", checked, worst, worst_param)
    store.zero_grad()
    return GradCheckResult(
        max_rel_error=worst,
        worst_param=worst_param,
        worst_index=worst_index,
        tolerance=tolerance,
        checked=checked,
    )
