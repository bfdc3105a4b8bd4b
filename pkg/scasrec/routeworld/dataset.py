"""Line-delimited JSON dataset files."""

import json
import logging
from pathlib import Path
from typing import Iterable, Iterator, List, Union

from pydantic import ValidationError

from scasrec.core.errors import DatasetParseError, SchemaVersionError
from scasrec.core.schema import SCHEMA_VERSION, Sample

logger = logging.getLogger(__name__)


def encode_sample(sample: Sample) -> str:
    """
    One dataset line (no trailing newline).

    ``json`` writes floats with their shortest round-trip representation, so
    reading the line back reproduces every float exactly.
    """
    return json.dumps(sample.model_dump(mode="json"), separators=(",", ":"), allow_nan=False)


def write_dataset(samples: Iterable[Sample], path: Union[str, Path]) -> int:
    """
    Write samples one per line.

    Returns:
        Number of samples written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for sample in samples:
            f.write(encode_sample(sample))
            f.write("\n")
            count += 1
    logger.info("wrote %d samples to %s", count, path)
    return count


def iter_dataset(path: Union[str, Path]) -> Iterator[Sample]:
    """
    Stream samples from a dataset file.

    Raises:
        DatasetParseError: On a malformed line (1-based line number)
        SchemaVersionError: On a record with another schema version
    """
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetParseError(line_number, f"invalid JSON ({e.msg})") from e
            if not isinstance(record, dict):
                raise DatasetParseError(line_number, "record is not an object")
            version = record.get("schema_version")
            if version != SCHEMA_VERSION:
                raise SchemaVersionError(
                    f"line {line_number}: schema version {version!r} is not supported "
                    f"(expected {SCHEMA_VERSION})",
                    action="Regenerate the dataset with this version of scasrec",
                )
            try:
                yield Sample.model_validate(record)
            except ValidationError as e:
                first = e.errors()[0]
                location = ".".join(str(p) for p in first.get("loc", ()))
                raise DatasetParseError(
                    line_number, f"{location or 'record'}: {first.get('msg')}"
                ) from e


def read_dataset(path: Union[str, Path]) -> List[Sample]:
    """Read a whole dataset file; an empty file yields an empty list."""
    return list(iter_dataset(path))
