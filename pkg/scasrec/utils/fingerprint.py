"""Fingerprints for configs, datasets and parameter stores."""

import hashlib
import json
from typing import Any, Dict, Mapping

import numpy as np


def generate_fingerprint(data: Dict[str, Any]) -> str:
    """
    Generate SHA256 fingerprint for JSON-compatible data.

    Args:
        data: Dictionary to fingerprint

    Returns:
        SHA256 hash string prefixed with "sha256:"
    """
    json_str = json.dumps(data, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(json_str.encode("utf-8")).hexdigest()


def arrays_fingerprint(arrays: Mapping[str, np.ndarray]) -> str:
    """
    Fingerprint named float arrays bit-exactly (names sorted).

    Args:
        arrays: Mapping from name to array

    Returns:
        SHA256 hash string prefixed with "sha256:"
    """
    sha256 = hashlib.sha256()
    for name in sorted(arrays):
        value = np.ascontiguousarray(arrays[name], dtype="<f8")
        sha256.update(name.encode("utf-8"))
        sha256.update(str(value.shape).encode("ascii"))
        sha256.update(value.tobytes())
    return "sha256:" + sha256.hexdigest()
