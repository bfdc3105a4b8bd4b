"""
The generative list model.

Parameter layout (all float64, names are checkpoint keys):

    feat/*                 feature processing (see scasrec.features.encoding)
    enc/W{q,k,v}           F x F   candidate self-attention
    enc/ff/*               scene-modulated feed-forward block
    dec/eor, dec/start     1 x F   learnable EOR and start vectors
    dec/W{q,k,v}           F x F   sigmoid state attention
    head/*                 scene-modulated logit head over [S_en, S_de]
"""

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from scasrec.core.config import ModelConfig
from scasrec.core.errors import CheckpointError, ContractError
from scasrec.core.schema import Sample
from scasrec.diffengine.params import ParamStore
from scasrec.diffengine.tensor import MASK_VALUE, Graph, Tensor
from scasrec.features.encoding import FeatureDims, assemble, init_feature_params
from scasrec.features.normalization import FeatureStats

logger = logging.getLogger(__name__)

_HISTORY_MODES = ("sigmoid", "softmax")


@dataclass
class EncoderState:
    """
    Per-sample encoder output reused at every decode step.

    ``s_en`` and ``x_de`` both carry the EOR vector as their last row.
    """

    s_en: Tensor
    x_de: Tensor
    scene: Tensor
    n: int

    @property
    def eor_index(self) -> int:
        return self.n


def scene_block(g: Graph, x: Tensor, scene: Tensor, prefix: str, project: bool = True) -> Tensor:
    """
    Two-layer transform whose hidden units are scaled and shifted per sample.

    ``hidden = tanh(x W1 + b1) * (1 + E Ws) + E Wsh``; the output is
    ``hidden W2 + b2`` when ``project`` is set, else the modulated hidden
    layer itself.
    """
    hidden = g.tanh(g.affine(x, f"{prefix}/W1", f"{prefix}/b1"))
    gate = g.matmul(scene, g.param(f"{prefix}/Ws"))
    scale = g.add(gate, g.constant(np.ones(gate.shape)))
    shift = g.matmul(scene, g.param(f"{prefix}/Wsh"))
    modulated = g.broadcast_add(g.broadcast_mul(hidden, scale), shift)
    if project:
        return g.affine(modulated, f"{prefix}/W2", f"{prefix}/b2")
    return modulated


class ScasrecModel:
    """Encoder, state-attention decoder and logit head bound to a parameter store."""

    def __init__(
        self,
        dims: FeatureDims,
        store: ParamStore,
        history_mode: str = "sigmoid",
        keep_start: bool = True,
        eor_enabled: bool = True,
    ):
        if history_mode not in _HISTORY_MODES:
            raise ContractError(f"unknown history mode {history_mode!r}")
        self.dims = dims
        self.store = store
        self.history_mode = history_mode
        self.keep_start = keep_start
        self.eor_enabled = eor_enabled

    # ------------------------------------------------------------ construction

    @classmethod
    def create(
        cls,
        config: ModelConfig,
        route_width: int,
        scene_width: int,
        history_width: int,
        seed: int = 0,
        eor_enabled: bool = True,
    ) -> "ScasrecModel":
        """Build a model with freshly initialized parameters."""
        dims = FeatureDims(
            route_width=route_width,
            scene_width=scene_width,
            history_width=history_width,
            width=config.width,
            scene_dim=config.scene_dim,
            embed_dim=config.embed_dim,
            hidden=config.hidden,
            time_buckets=config.time_buckets,
            familiarity_levels=config.familiarity_levels,
        )
        model = cls(dims, ParamStore(), config.history_mode, config.keep_start, eor_enabled)
        model.init_params(np.random.default_rng(seed), config.init_scale)
        logger.info("initialized model with %d parameters", model.store.size())
        return model

    def init_params(self, rng: np.random.Generator, scale: float = 1.0) -> None:
        d = self.dims
        f, hidden, s = d.width, d.hidden, d.scene_dim
        store = self.store
        init_feature_params(store, d, rng, scale)
        for name in ("enc/Wq", "enc/Wk", "enc/Wv"):
            store.add_random(rng, name, (f, f), scale)
        self._init_block("enc/ff", f, hidden, s, rng, scale, out=f)
        store.add("dec/eor", rng.normal(0.0, 0.1, size=(1, f)))
        store.add("dec/start", rng.normal(0.0, 0.1, size=(1, f)))
        for name in ("dec/Wq", "dec/Wk", "dec/Wv"):
            store.add_random(rng, name, (f, f), scale)
        self._init_block("head", 2 * f, hidden, s, rng, scale, out=None)
        store.add_random(rng, "head/w2", (hidden, 1), scale)

    def _init_block(
        self,
        prefix: str,
        width_in: int,
        hidden: int,
        scene_dim: int,
        rng: np.random.Generator,
        scale: float,
        out: Optional[int],
    ) -> None:
        store = self.store
        store.add_random(rng, f"{prefix}/W1", (width_in, hidden), scale)
        store.add_zeros(f"{prefix}/b1", (1, hidden))
        store.add_random(rng, f"{prefix}/Ws", (scene_dim, hidden), 0.1 * scale)
        store.add_random(rng, f"{prefix}/Wsh", (scene_dim, hidden), 0.1 * scale)
        if out is not None:
            store.add_random(rng, f"{prefix}/W2", (hidden, out), scale)
            store.add_zeros(f"{prefix}/b2", (1, out))

    # ---------------------------------------------------------- serialization

    def meta_tensors(self) -> Dict[str, np.ndarray]:
        d = self.dims
        return {
            "meta/dims": np.array(
                [
                    d.route_width,
                    d.scene_width,
                    d.history_width,
                    d.width,
                    d.scene_dim,
                    d.embed_dim,
                    d.hidden,
                    d.time_buckets,
                    d.familiarity_levels,
                ],
                dtype=np.float64,
            ),
            "meta/flags": np.array(
                [
                    float(_HISTORY_MODES.index(self.history_mode)),
                    float(self.keep_start),
                    float(self.eor_enabled),
                ]
            ),
        }

    def param_tensors(self) -> Dict[str, np.ndarray]:
        return {f"param/{k}": v for k, v in self.store.snapshot().items()}

    @classmethod
    def from_tensors(cls, tensors: Mapping[str, np.ndarray]) -> "ScasrecModel":
        """Rebuild a model from checkpoint tensors."""
        try:
            raw_dims = [int(round(v)) for v in tensors["meta/dims"]]
            flags = tensors["meta/flags"]
        except KeyError:
            raise CheckpointError("checkpoint lacks model metadata") from None
        dims = FeatureDims(*raw_dims)
        model = cls(
            dims,
            ParamStore(),
            history_mode=_HISTORY_MODES[int(round(flags[0]))],
            keep_start=bool(flags[1]),
            eor_enabled=bool(flags[2]),
        )
        model.init_params(np.random.default_rng(0))
        values = {k[len("param/"):]: v for k, v in tensors.items() if k.startswith("param/")}
        try:
            model.store.load_values(values)
        except Exception as e:
            raise CheckpointError(f"checkpoint parameters do not fit the model: {e}") from e
        return model

    # ----------------------------------------------------------------- forward

    def encode(self, g: Graph, x_en: Tensor, scene: Tensor) -> EncoderState:
        """
        Self-attention over candidates, scene-modulated feed-forward, EOR row.

        Returns:
            EncoderState with (N+1) x F ``s_en``
        """
        n = x_en.shape[0]
        if n < 1:
            raise ContractError("encode needs at least one candidate")
        q = g.matmul(x_en, g.param("enc/Wq"))
        k = g.matmul(x_en, g.param("enc/Wk"))
        v = g.matmul(x_en, g.param("enc/Wv"))
        logits = g.scale(g.matmul(q, g.transpose(k)), 1.0 / np.sqrt(self.dims.width))
        attended = g.add(x_en, g.matmul(g.softmax(logits), v))
        encoded = g.add(attended, scene_block(g, attended, scene, "enc/ff"))
        eor = g.param("dec/eor")
        return EncoderState(
            s_en=g.concat([encoded, eor], axis=0),
            x_de=g.concat([x_en, eor], axis=0),
            scene=scene,
            n=n,
        )

    def encode_sample(self, g: Graph, sample: Sample, stats: FeatureStats) -> EncoderState:
        """Feature processing followed by ``encode``."""
        rep = assemble(g, sample, stats, self.dims, self.history_mode)
        return self.encode(g, rep.x_en, rep.scene)

    def state_attention(self, g: Graph, x_de: Tensor, x_bar: Tensor) -> Tensor:
        """``sigmoid(X_de Wq (X_bar Wk)^T) X_bar Wv``: (N+1) x F."""
        q = g.matmul(x_de, g.param("dec/Wq"))
        k = g.matmul(x_bar, g.param("dec/Wk"))
        v = g.matmul(x_bar, g.param("dec/Wv"))
        return g.matmul(g.sigmoid(g.matmul(q, g.transpose(k))), v)

    def selected_rows(self, g: Graph, enc: EncoderState, selected: Sequence[int]) -> Tensor:
        """X_bar for the current step: start vector and/or looked-up selected rows."""
        start = g.param("dec/start")
        if not selected:
            return start
        rows = g.gather_rows(enc.x_de, list(selected))
        return g.concat([start, rows], axis=0) if self.keep_start else rows

    def step_mask(self, enc: EncoderState, selected: Sequence[int]) -> np.ndarray:
        mask = np.zeros((1, enc.n + 1))
        mask[0, list(selected)] = MASK_VALUE
        if not self.eor_enabled:
            mask[0, enc.eor_index] = MASK_VALUE
        return mask

    def decode_step(self, g: Graph, enc: EncoderState, selected: Sequence[int]) -> Tensor:
        """
        Probability row P_t (1 x (N+1)) given the already selected indices.

        Raises:
            ContractError: If ``selected`` repeats or is out of range
        """
        if len(set(selected)) != len(selected):
            raise ContractError(f"selected list repeats an index: {list(selected)}")
        if any(i < 0 or i >= enc.n for i in selected):
            raise ContractError(f"selected index out of range for N={enc.n}: {list(selected)}")
        x_bar = self.selected_rows(g, enc, selected)
        s_de = self.state_attention(g, enc.x_de, x_bar)
        state = g.concat([enc.s_en, s_de], axis=1)
        hidden = scene_block(g, state, enc.scene, "head", project=False)
        logits = g.transpose(g.matmul(hidden, g.param("head/w2")))
        return g.softmax(g.masked_add(logits, self.step_mask(enc, selected)))
