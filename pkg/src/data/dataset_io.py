"""
Line-delimited JSON persistence for records.

One record per line, UTF-8. Field order is not significant; unknown fields
are rejected by the Record schema.
"""

import json
from pathlib import Path
from typing import Iterable, List, Optional, Union

from loguru import logger
from pydantic import ValidationError

from src.utils.exceptions import DatasetParseError, RecordValidationError

from .records import Record


def save(records: Iterable[Record], path: Union[str, Path]) -> int:
    """
    Write records, one JSON object per line.

    Args:
        records: Records to write
        path: Target file (parent directories are created)

    Returns:
        Number of records written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(record.model_dump_json(exclude_none=True))
            fh.write("\n")
            count += 1
    logger.info(f"Saved {count} records to {path}")
    return count


def parse_line(line: str, line_number: int, image_dim: Optional[int] = None) -> Record:
    """
    Parse and validate one dataset line.

    Raises:
        DatasetParseError: The line is not a JSON object
        RecordValidationError: The object violates the record invariants
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise DatasetParseError(f"malformed JSON ({e.msg})", line_number) from e
    if not isinstance(obj, dict):
        raise DatasetParseError("expected a JSON object", line_number)

    record_id = obj.get("id")
    try:
        record = Record.model_validate(obj)
    except ValidationError as e:
        details = "; ".join(err["msg"] for err in e.errors())
        raise RecordValidationError(f"{details} (line {line_number})", record_id) from e

    if image_dim is not None and record.image is not None and len(record.image) != image_dim:
        raise RecordValidationError(
            f"image has {len(record.image)} values, expected {image_dim}", record.id
        )
    return record


def load(path: Union[str, Path], image_dim: Optional[int] = None) -> List[Record]:
    """
    Read records written by save().

    Args:
        path: Dataset file
        image_dim: Expected image length (checked when given)

    Returns:
        Records in file order (an empty file yields an empty list)
    """
    path = Path(path)
    records: List[Record] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            records.append(parse_line(line, line_number, image_dim))
    logger.info(f"Loaded {len(records)} records from {path}")
    return records
