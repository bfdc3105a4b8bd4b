"""SCASRec network and list decoders."""

from scasrec.model.decoding import DecodeState, greedy_decode, replay_log_probs, sample_decode
from scasrec.model.network import EncoderState, ScasrecModel, scene_block

__all__ = [
    "DecodeState",
    "EncoderState",
    "ScasrecModel",
    "greedy_decode",
    "replay_log_probs",
    "sample_decode",
    "scene_block",
]
