"""
poissonet.counts - Count matrices and their CSV representation.

A count matrix holds n variables (rows) observed over t samples (columns).
The on-disk format is UTF-8, comma-separated: the first column is the
variable label, the remaining columns are nonnegative integer counts, and a
single optional header row carries sample ids. The header is recognised by
its label cell ("variable", "gene", "label", "name" or "id") or by having no
integer sample id.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# First-row label cells that mark a header row regardless of the sample ids.
HEADER_LABELS = ("variable", "gene", "label", "name", "id")


class CountDataError(ValueError):
    """Raised when count data is malformed or violates the count domain."""

    def __init__(
        self, message: str, line: Optional[int] = None, column: Optional[int] = None
    ):
        self.line = line
        self.column = column
        location = []
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column {column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


@dataclass(frozen=True)
class CountMatrix:
    """Immutable n x t matrix of nonnegative integer event counts."""

    values: np.ndarray
    labels: Tuple[str, ...] = ()
    sample_ids: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        values = np.array(self.values, copy=True)
        if values.ndim != 2:
            raise CountDataError(f"count matrix must be 2-D, got {values.ndim}-D")
        if values.shape[0] < 1:
            raise CountDataError("count matrix needs at least one variable")
        if values.dtype.kind == "f":
            if not np.all(np.isfinite(values)) or np.any(values != np.floor(values)):
                raise CountDataError("counts must be integers")
        elif values.dtype.kind not in "iub":
            raise CountDataError(f"unsupported count dtype {values.dtype}")
        values = values.astype(np.int64)
        if np.any(values < 0):
            raise CountDataError("negative count")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

        labels = tuple(str(label) for label in self.labels)
        if not labels:
            labels = tuple(str(i + 1) for i in range(values.shape[0]))
        if len(labels) != values.shape[0]:
            raise CountDataError(
                f"{len(labels)} labels given for {values.shape[0]} variables"
            )
        object.__setattr__(self, "labels", labels)

        sample_ids = tuple(str(s) for s in self.sample_ids)
        if sample_ids and len(sample_ids) != values.shape[1]:
            raise CountDataError(
                f"{len(sample_ids)} sample ids given for {values.shape[1]} samples"
            )
        object.__setattr__(self, "sample_ids", sample_ids)

    @property
    def n_variables(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.values.shape[1])

    def row(self, index: int) -> np.ndarray:
        """Return one variable's samples as floats."""
        return self.values[index].astype(float)

    def take(self, indices: Sequence[int]) -> "CountMatrix":
        """Return the sub-matrix of the given rows, labels preserved."""
        indices = list(indices)
        return CountMatrix(
            self.values[indices],
            tuple(self.labels[i] for i in indices),
            self.sample_ids,
        )

    def with_values(self, values: np.ndarray) -> "CountMatrix":
        """Same labels and sample ids, new values of identical shape."""
        return CountMatrix(values, self.labels, self.sample_ids)

    def totals(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def is_constant(self, index: int) -> bool:
        row = self.values[index]
        return bool(np.all(row == row[0]))


def _parse_count(cell: str, line: int, column: int) -> int:
    text = cell.strip()
    try:
        value = int(text)
    except ValueError:
        try:
            as_float = float(text)
        except ValueError:
            raise CountDataError(f"malformed number {cell!r}", line, column) from None
        raise CountDataError(
            f"non-integer count {as_float!r}", line, column
        ) from None
    if value < 0:
        raise CountDataError(f"negative count {value}", line, column)
    return value


def _looks_like_header(cells: List[str]) -> bool:
    """
    Decide whether the first row is a header.

    It is when its label cell names the label column (HEADER_LABELS,
    case-insensitive, as written by save_counts) or when none of its data
    cells is an integer. Numeric sample ids therefore need a recognised
    label cell.
    """
    if len(cells) > 1 and cells[0].strip().lower() in HEADER_LABELS:
        return True
    for cell in cells[1:]:
        try:
            int(cell.strip())
            return False
        except ValueError:
            continue
    return len(cells) > 1


def load_counts(path: PathLike) -> CountMatrix:
    """
    Load a count matrix from CSV.

    Args:
        path: CSV file, rows = variables, first column = label

    Returns:
        CountMatrix with labels and (if a header row was present) sample ids

    Raises:
        CountDataError: On ragged rows, malformed, negative or non-integer
            entries; the error names the offending line and column
        OSError: If the file cannot be read
    """
    path = Path(path)
    labels: List[str] = []
    rows: List[List[int]] = []
    sample_ids: Tuple[str, ...] = ()
    width: Optional[int] = None

    with open(path, "r", encoding="utf-8-sig", newline="") as f:
        reader = csv.reader(f)
        for line_num, cells in enumerate(reader, start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if line_num == 1 and _looks_like_header(cells):
                sample_ids = tuple(c.strip() for c in cells[1:])
                width = len(cells)
                continue
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise CountDataError(
                    f"ragged row: expected {width} fields, found {len(cells)}",
                    line_num,
                )
            if len(cells) < 2:
                raise CountDataError("row has a label but no counts", line_num)
            label = cells[0].strip()
            if not label:
                raise CountDataError("missing variable label", line_num, 1)
            labels.append(label)
            rows.append(
                [
                    _parse_count(cell, line_num, col)
                    for col, cell in enumerate(cells[1:], start=2)
                ]
            )

    if not rows:
        raise CountDataError(f"no count rows found in {path}")
    if len(set(labels)) != len(labels):
        raise CountDataError("duplicate variable labels")

    counts = CountMatrix(np.array(rows, dtype=np.int64), tuple(labels), sample_ids)
    logger.info(
        f"Loaded {counts.n_variables} variables x {counts.n_samples} samples "
        f"from {path}"
    )
    return counts


def save_counts(counts: CountMatrix, path: PathLike) -> None:
    """
    Write a count matrix in the format read by load_counts.

    A header row is always written; missing sample ids become s1..st.
    """
    path = Path(path)
    sample_ids = counts.sample_ids or tuple(
        f"s{i + 1}" for i in range(counts.n_samples)
    )
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["variable", *sample_ids])
        for label, row in zip(counts.labels, counts.values):
            writer.writerow([label, *(int(v) for v in row)])
    logger.debug(f"Wrote {counts.n_variables} count rows to {path}")
