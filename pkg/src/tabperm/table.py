"""Table data model, cell identities, and text ingestion (CSV-style and JSON grid)."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

from .errors import EmptyInputError, StructuralError

DATA = "data-cell"
ROW_HEADER = "row-header"
COL_HEADER = "col-header"
KINDS = (DATA, ROW_HEADER, COL_HEADER)


@dataclass(frozen=True, order=True)
class CellId:
    """Identity of a table element in ORIGINAL coordinates.

    Headers use ``-1`` on the axis they do not index: a row header is
    ``CellId(i, -1, ROW_HEADER)``, a column header ``CellId(-1, j, COL_HEADER)``.
    """

    row: int
    col: int
    kind: str = DATA

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown cell kind {self.kind!r}")

    def to_json(self) -> list:
        return [self.row, self.col, self.kind]

    @classmethod
    def from_json(cls, obj) -> "CellId":
        row, col, kind = obj
        return cls(int(row), int(col), str(kind))

    def __str__(self):
        if self.kind == DATA:
            return f"({self.row},{self.col})"
        if self.kind == ROW_HEADER:
            return f"row-header({self.row})"
        return f"col-header({self.col})"


def row_header_id(i: int) -> CellId:
    return CellId(i, -1, ROW_HEADER)


def col_header_id(j: int) -> CellId:
    return CellId(-1, j, COL_HEADER)


@dataclass(frozen=True)
class Table:
    """An n x m grid of text cells with one header per row and per column.

    ``corner`` is the label above the row-header column when the source had
    one (e.g. "Club"); ``synthetic_row_headers`` marks generated ``row_i``
    headers so writers can omit them again.
    """

    col_headers: tuple[str, ...]
    row_headers: tuple[str, ...]
    cells: tuple[tuple[str, ...], ...]
    caption: str | None = None
    corner: str | None = None
    synthetic_row_headers: bool = False
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "col_headers", tuple(self.col_headers))
        object.__setattr__(self, "row_headers", tuple(self.row_headers))
        object.__setattr__(self, "cells", tuple(tuple(r) for r in self.cells))
        n, m = len(self.cells), len(self.col_headers)
        if n < 1 or m < 1:
            raise StructuralError(f"table must have at least one row and column, got {n}x{m}")
        if len(self.row_headers) != n:
            raise StructuralError(f"{len(self.row_headers)} row headers for {n} rows")
        for i, row in enumerate(self.cells):
            if len(row) != m:
                raise StructuralError(f"row {i} has {len(row)} cells, expected {m}")
        for value in (*self.col_headers, *self.row_headers, *(c for r in self.cells for c in r)):
            if not isinstance(value, str):
                raise StructuralError(f"cell values must be strings, got {type(value).__name__}")

    @property
    def n(self) -> int:
        return len(self.cells)

    @property
    def m(self) -> int:
        return len(self.col_headers)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n, self.m

    def value(self, cid: CellId) -> str:
        if cid.kind == DATA:
            return self.cells[cid.row][cid.col]
        if cid.kind == ROW_HEADER:
            return self.row_headers[cid.row]
        return self.col_headers[cid.col]

    def element_ids(self) -> list[CellId]:
        """Data cells (row-major), then row headers, then column headers."""
        return (
            canonical_cell_order(self)
            + [row_header_id(i) for i in range(self.n)]
            + [col_header_id(j) for j in range(self.m)]
        )


def canonical_cell_order(table: Table) -> list[CellId]:
    return [CellId(i, j) for i in range(table.n) for j in range(table.m)]


def synthetic_row_headers(n: int) -> tuple[str, ...]:
    return tuple(f"row_{i}" for i in range(n))


def make_table(cells: Sequence[Sequence[str]], col_headers: Sequence[str],
               row_headers: Sequence[str] | None = None, **kw) -> Table:
    """Build a table, generating ``row_i`` headers when none are given."""
    if row_headers is None:
        return Table(col_headers, synthetic_row_headers(len(cells)), cells,
                     synthetic_row_headers=True, **kw)
    return Table(col_headers, row_headers, cells, **kw)


def parse_table(source: str, format: str = "csv", *, delimiter: str = ",",
                row_header_column: bool = False, name: str | None = None) -> Table:
    """Parse delimiter-separated text or a JSON grid into a :class:`Table`.

    For ``format="csv"`` the first record holds the column headers. With
    ``row_header_column=True`` column 0 holds the row headers and its header
    cell becomes ``corner``; otherwise every column is data and row headers
    are synthetic. Cell text is kept exactly as the quoting rules yield it.
    """
    if format in ("csv", "delimited", "tsv"):
        if format == "tsv":
            delimiter = "\t"
        return _parse_delimited(source, delimiter, row_header_column, name)
    if format in ("json", "json-grid"):
        return _parse_json_grid(source, name)
    raise ValueError(f"unknown table format {format!r}")


def _parse_delimited(source, delimiter, row_header_column, name):
    if not source or not source.strip():
        raise EmptyInputError("empty input")
    reader = csv.reader(io.StringIO(source, newline=""), delimiter=delimiter, strict=True)
    try:
        records = [rec for rec in reader if rec != []]
    except csv.Error as exc:
        raise StructuralError(f"malformed delimited text: {exc}") from exc
    if not records:
        raise EmptyInputError("empty input")
    header, body = records[0], records[1:]
    width = len(header)
    for k, rec in enumerate(body, start=1):
        if len(rec) != width:
            raise StructuralError(
                f"ragged input: record {k} (line-level row {k + 1}) has {len(rec)} fields, "
                f"header has {width}")
    if not body:
        raise StructuralError("table has a header line but no data rows")
    if row_header_column:
        if width < 2:
            raise StructuralError("row_header_column needs at least two columns")
        return Table(header[1:], [r[0] for r in body], [r[1:] for r in body],
                     corner=header[0], name=name)
    return make_table(body, header, name=name)


def _json_text(value, where):
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise StructuralError(f"{where}: unsupported JSON value {value!r}")
    return json.dumps(value)


def _parse_json_grid(source, name):
    if not source or not source.strip():
        raise EmptyInputError("empty input")
    try:
        obj = json.loads(source)
    except json.JSONDecodeError as exc:
        raise StructuralError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "col_headers" not in obj or "cells" not in obj:
        raise StructuralError("JSON grid needs 'col_headers' and 'cells'")
    unknown = set(obj) - {"caption", "col_headers", "row_headers", "cells", "corner"}
    if unknown:
        raise StructuralError(f"unknown JSON grid keys: {sorted(unknown)}")
    col_headers = [_json_text(v, "col_headers") for v in obj["col_headers"]]
    cells = []
    for i, row in enumerate(obj["cells"]):
        if not isinstance(row, list):
            raise StructuralError(f"cells[{i}] is not a list")
        if len(row) != len(col_headers):
            raise StructuralError(
                f"ragged input: row {i} has {len(row)} cells, expected {len(col_headers)}")
        cells.append([_json_text(v, f"cells[{i}]") for v in row])
    if not cells:
        raise EmptyInputError("JSON grid has no rows")
    caption = obj.get("caption")
    corner = obj.get("corner")
    if "row_headers" in obj and obj["row_headers"] is not None:
        rh = [_json_text(v, "row_headers") for v in obj["row_headers"]]
        return Table(col_headers, rh, cells, caption=caption, corner=corner, name=name)
    return make_table(cells, col_headers, caption=caption, corner=corner, name=name)


def write_table(table: Table, format: str = "csv", *, delimiter: str = ",") -> str:
    """Serialize back to the ingestion formats; inverse of :func:`parse_table`."""
    if format in ("json", "json-grid"):
        obj = {}
        if table.caption is not None:
            obj["caption"] = table.caption
        if table.corner is not None:
            obj["corner"] = table.corner
        obj["col_headers"] = list(table.col_headers)
        if not table.synthetic_row_headers:
            obj["row_headers"] = list(table.row_headers)
        obj["cells"] = [list(r) for r in table.cells]
        return json.dumps(obj, ensure_ascii=False, indent=1)
    if format == "tsv":
        delimiter = "\t"
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\r\n",
                        quoting=csv.QUOTE_ALL)
    if table.synthetic_row_headers:
        writer.writerow(table.col_headers)
        writer.writerows(table.cells)
    else:
        writer.writerow([table.corner or "", *table.col_headers])
        for rh, row in zip(table.row_headers, table.cells):
            writer.writerow([rh, *row])
    return buf.getvalue()


def read_table(path, format: str | None = None, **kw) -> Table:
    """Load a table file; format inferred from the extension when omitted."""
    from pathlib import Path

    path = Path(path)
    if format is None:
        format = {".json": "json", ".tsv": "tsv"}.get(path.suffix.lower(), "csv")
    text = path.read_text(encoding="utf-8")
    return parse_table(text, format, name=kw.pop("name", path.stem), **kw)
