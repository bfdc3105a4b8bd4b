"""Gradient checks of the model components on small random instances."""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from scasrec.core.config import ModelConfig, TrainConfig
from scasrec.core.schema import Route, Sample
from scasrec.diffengine.gradcheck import GradCheckResult, grad_check
from scasrec.diffengine.tensor import Graph, Tensor
from scasrec.features.encoding import assemble
from scasrec.features.normalization import FeatureStats, fit_feature_stats
from scasrec.model.decoding import sample_decode
from scasrec.model.network import ScasrecModel
from scasrec.routeworld.behavior import label_candidates
from scasrec.rewards.signals import discounted_returns
from scasrec.trainer.reinforce import frozen_surrogate, step_rewards
from scasrec.trainer.supervised import supervised_loss

logger = logging.getLogger(__name__)

COMPONENTS = ("features", "encoder", "state_attention", "supervised_loss", "rl_surrogate")

ROUTE_WIDTH = 16
SCENE_WIDTH = 10
HISTORY_WIDTH = 14
HISTORY_LENGTH = 3
EDGE_POOL = 40


@dataclass
class ComponentCheck:
    component: str
    seed: int
    result: GradCheckResult

    @property
    def passed(self) -> bool:
        return self.result.passed


def toy_sample(rng: np.random.Generator, n: int, sample_id: int = 0) -> Sample:
    """Random sample with ``n`` candidates over a small edge pool."""
    candidates = []
    for _ in range(n):
        size = int(rng.integers(3, 9))
        edges = sorted(int(e) for e in rng.choice(EDGE_POOL, size=size, replace=False))
        candidates.append(Route(edge_ids=edges, features=list(rng.normal(size=ROUTE_WIDTH))))
    trajectory = sorted(int(e) for e in rng.choice(EDGE_POOL, size=6, replace=False))
    cr, gt = label_candidates(candidates, trajectory)
    scene = [
        float(rng.integers(1, 8)),
        float(rng.integers(1, 5)),
        float(rng.integers(1, 5)),
    ] + list(rng.normal(size=SCENE_WIDTH - 3))
    history = [list(rng.normal(size=HISTORY_WIDTH)) for _ in range(HISTORY_LENGTH)]
    return Sample(
        sample_id=sample_id,
        n_candidates=n,
        candidates=candidates,
        scene=scene,
        history=history,
        trajectory_edge_ids=trajectory,
        cr=cr,
        gt_index=gt,
    )


def _projection(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.normal(size=shape)


def _weighted_sum(g: Graph, x: Tensor, weights: np.ndarray) -> Tensor:
    return g.sum(g.mul(x, g.constant(weights)))


def _loss_builders(
    model: ScasrecModel,
    sample: Sample,
    stats: FeatureStats,
    seed: int,
) -> Dict[str, Callable[[Graph], Tensor]]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    n, f = sample.n_candidates, model.dims.width
    feature_weights = _projection(rng, (n, f))
    encoder_weights = _projection(rng, (n + 1, f))
    attention_weights = _projection(rng, (n + 1, f))
    selected = [int(i) for i in rng.permutation(n)[:2]]
    train_config = TrainConfig(seed=seed)

    def features(g: Graph) -> Tensor:
        rep = assemble(g, sample, stats, model.dims, model.history_mode)
        return _weighted_sum(g, rep.x_en, feature_weights)

    def encoder(g: Graph) -> Tensor:
        return _weighted_sum(g, model.encode_sample(g, sample, stats).s_en, encoder_weights)

    def state_attention(g: Graph) -> Tensor:
        enc = model.encode_sample(g, sample, stats)
        x_bar = model.selected_rows(g, enc, selected)
        return _weighted_sum(g, model.state_attention(g, enc.x_de, x_bar), attention_weights)

    def supervised(g: Graph) -> Tensor:
        loss, _ = supervised_loss(model, g, [sample], stats, 0.1, train_config)
        return loss

    rollout = sample_decode(
        model,
        sample,
        stats,
        train_config.resolve_t_max(n),
        np.random.default_rng(np.random.SeedSequence([seed, 11])),
    )
    returns = discounted_returns(
        step_rewards(rollout, sample, 0.1, train_config), train_config.discount
    )

    def rl(g: Graph) -> Tensor:
        return frozen_surrogate(model, g, sample, stats, rollout.actions, returns)

    return {
        "features": features,
        "encoder": encoder,
        "state_attention": state_attention,
        "supervised_loss": supervised,
        "rl_surrogate": rl,
    }


def _corrupt(analytic: Dict[str, np.ndarray]) -> None:
    for grad in analytic.values():
        grad += 1.0


def run_gradcheck(
    seeds: int = 3,
    n: int = 5,
    width: int = 8,
    h: float = 1e-5,
    tolerance: float = 1e-4,
    max_elements: Optional[int] = 8,
    corrupt: Optional[str] = None,
    components: Sequence[str] = COMPONENTS,
) -> List[ComponentCheck]:
    """
    Check every component on ``seeds`` fresh random models and samples.

    Args:
        seeds: Number of random instances
        n: Candidates per sample
        width: Model width F
        h: Finite-difference step
        tolerance: Pass threshold on the relative error
        max_elements: Elements checked per parameter (None = all)
        corrupt: Component whose analytic gradient is deliberately broken
        components: Components to check

    Returns:
        One check per (seed, component)
    """
    if corrupt is not None and corrupt not in COMPONENTS:
        raise ValueError(f"unknown component {corrupt!r}; choose from {COMPONENTS}")
    model_config = ModelConfig(width=width, scene_dim=4, embed_dim=2, hidden=width)
    checks: List[ComponentCheck] = []
    for seed in range(seeds):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
        samples = [toy_sample(rng, n, sample_id=i) for i in range(4)]
        stats = fit_feature_stats(samples)
        model = ScasrecModel.create(
            model_config, ROUTE_WIDTH, SCENE_WIDTH, HISTORY_WIDTH, seed=seed
        )
        builders = _loss_builders(model, samples[0], stats, seed)
        for component in components:
            result = grad_check(
                builders[component],
                model.store,
                h=h,
                tolerance=tolerance,
                max_elements=max_elements,
                seed=seed,
                analytic_hook=_corrupt if component == corrupt else None,
            )
            logger.info(
                "seed %d %s: max rel error %.3e over %d elements",
                seed,
                component,
                result.max_rel_error,
                result.checked,
            )
            checks.append(ComponentCheck(component, seed, result))
    return checks


def summarize(checks: Sequence[ComponentCheck]) -> Dict[str, GradCheckResult]:
    """Worst result per component, in component order."""
    worst: Dict[str, GradCheckResult] = {}
    for check in checks:
        current = worst.get(check.component)
        if current is None or check.result.max_rel_error > current.max_rel_error:
            worst[check.component] = check.result
    return {c: worst[c] for c in COMPONENTS if c in worst}
