"""
CSV tables with provenance headers.

Every table starts with ``#`` comment lines naming the tool version, the
generation time and the effective config. The timestamp appears on the first
line only, so two runs with the same inputs differ in that line alone.
"""

import csv
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

from scasrec import __version__


def provenance_lines(
    fingerprint: str,
    config_json: str,
    extra: Optional[Sequence[str]] = None,
    generated_at: Optional[datetime] = None,
) -> List[str]:
    """Header comment lines (without trailing newlines)."""
    stamp = (generated_at or datetime.now(timezone.utc)).isoformat(timespec="seconds")
    lines = [
        f"# scasrec {__version__} generated_at={stamp}",
        f"# config {fingerprint} {config_json}",
    ]
    lines.extend(f"# {line}" for line in (extra or ()))
    return lines


def format_cell(value: Any) -> str:
    """Deterministic text for one cell; floats use repr so values round-trip."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def open_table(
    path: Union[str, Path], header: Sequence[str], columns: Sequence[str]
) -> Tuple[TextIO, "csv.DictWriter"]:
    """Create ``path`` with its comment header and column row; caller closes the handle."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = open(path, "w", encoding="utf-8", newline="")
    for line in header:
        handle.write(line + "\n")
    writer = csv.DictWriter(handle, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    return handle, writer


def write_csv_table(
    path: Union[str, Path],
    header: Sequence[str],
    columns: Sequence[str],
    rows: Iterable[Dict[str, Any]],
) -> int:
    """Write a whole table; returns the number of data rows."""
    handle, writer = open_table(path, header, columns)
    count = 0
    with handle:
        for row in rows:
            writer.writerow({k: format_cell(row.get(k)) for k in columns})
            count += 1
    return count


def read_comments(path: Union[str, Path]) -> List[str]:
    """Leading ``#`` lines of a table, markers stripped."""
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            out.append(line[1:].strip())
    return out


def read_csv_table(path: Union[str, Path]) -> List[Dict[str, str]]:
    """Rows of a table as dictionaries, comment lines skipped."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        body = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(body))
