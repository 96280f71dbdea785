"""Linearize a table into one string while keeping every cell's character span.

Delimited-tokens grammar (no whitespace is inserted anywhere)::

    text   := header body
    header := item(corner) ("[CELL]" item(h_j))*  "[SEP]"
    body   := ("[ROW]" item(r_i) ("[CELL]" item(c_ij))*)*
    item(s) := s                       if s holds no reserved literal
             | "[ESC:" len(s) "]" s    otherwise (len in code points)

Reserved literals: ``[ROW]``, ``[CELL]``, ``[SEP]``, ``[ESC:``, ``[TARGET]``,
``[/TARGET]``. The corner slot is empty when the table has no corner label.
For the 1x1 table with header ``Age``, row header ``row_0`` and cell ``12``::

    [CELL]Age[SEP][ROW]row_0[CELL]12

Spans point at the raw value (after any escape prefix), so ``text[span]`` is
always the cell text in this format.

The markdown format is a GitHub pipe table. There ``\\``, ``|``, CR and LF are
backslash-escaped, spans cover the escaped rendering, and
:meth:`SerializedTable.extract` undoes the escape.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .table import CellId, Table, col_header_id, row_header_id

DELIMITED = "delimited-tokens"
MARKDOWN = "markdown"
FORMATS = (DELIMITED, MARKDOWN)

ROW, CELL, SEP, ESC = "[ROW]", "[CELL]", "[SEP]", "[ESC:"
TARGET_OPEN, TARGET_CLOSE = "[TARGET]", "[/TARGET]"
RESERVED = (ROW, CELL, SEP, ESC, TARGET_OPEN, TARGET_CLOSE)

_MD_ESCAPES = {"\\": "\\\\", "|": "\\|", "\n": "\\n", "\r": "\\r"}
_MD_UNESCAPES = {"\\": "\\", "|": "|", "n": "\n", "r": "\r"}


@dataclass(frozen=True)
class SerializedTable:
    text: str
    spans: dict[CellId, tuple[int, int]]
    format: str

    def extract(self, cid: CellId) -> str:
        start, end = self.spans[cid]
        raw = self.text[start:end]
        return md_unescape(raw) if self.format == MARKDOWN else raw

    def marked(self, cid: CellId) -> str:
        """The text with ``cid`` wrapped in target markers (full-context requests)."""
        start, end = self.spans[cid]
        return self.text[:start] + TARGET_OPEN + self.text[start:end] + TARGET_CLOSE + self.text[end:]


def needs_escape(s: str) -> bool:
    return any(tok in s for tok in RESERVED)


def _item(s: str) -> tuple[str, int]:
    """Rendered item and the offset of the raw value inside it."""
    if needs_escape(s):
        prefix = f"{ESC}{len(s)}]"
        return prefix + s, len(prefix)
    return s, 0


def md_escape(s: str) -> str:
    return "".join(_MD_ESCAPES.get(ch, ch) for ch in s)


def md_unescape(s: str) -> str:
    out, i = [], 0
    while i < len(s):
        if s[i] == "\\" and i + 1 < len(s):
            out.append(_MD_UNESCAPES.get(s[i + 1], s[i + 1]))
            i += 2
        else:
            out.append(s[i])
            i += 1
    return "".join(out)


class _Builder:
    def __init__(self):
        self.parts: list[str] = []
        self.pos = 0
        self.spans: dict[CellId, tuple[int, int]] = {}

    def emit(self, s: str):
        self.parts.append(s)
        self.pos += len(s)

    def value(self, s: str, cid: CellId | None, escape):
        rendered, offset = escape(s)
        if cid is not None:
            start = self.pos + offset
            self.spans[cid] = (start, start + len(rendered) - offset)
        self.emit(rendered)

    def text(self) -> str:
        return "".join(self.parts)


def linearize(table: Table, format: str = DELIMITED) -> SerializedTable:
    b = _Builder()
    if format == DELIMITED:
        b.value(table.corner or "", None, _item)
        for j, h in enumerate(table.col_headers):
            b.emit(CELL)
            b.value(h, col_header_id(j), _item)
        b.emit(SEP)
        for i in range(table.n):
            b.emit(ROW)
            b.value(table.row_headers[i], row_header_id(i), _item)
            for j in range(table.m):
                b.emit(CELL)
                b.value(table.cells[i][j], CellId(i, j), _item)
    elif format == MARKDOWN:
        md = lambda s: (md_escape(s), 0)  # noqa: E731
        b.emit("| ")
        b.value(table.corner or "", None, md)
        for j, h in enumerate(table.col_headers):
            b.emit(" | ")
            b.value(h, col_header_id(j), md)
        b.emit(" |\n|" + " --- |" * (table.m + 1) + "\n")
        for i in range(table.n):
            b.emit("| ")
            b.value(table.row_headers[i], row_header_id(i), md)
            for j in range(table.m):
                b.emit(" | ")
                b.value(table.cells[i][j], CellId(i, j), md)
            b.emit(" |\n")
    else:
        raise ValueError(f"unknown serialization format {format!r}")
    return SerializedTable(b.text(), b.spans, format)


_TOKEN = re.compile(r"\[ROW\]|\[CELL\]|\[SEP\]")


def _read_item(text: str, pos: int) -> tuple[str, int]:
    if text.startswith(ESC, pos):
        close = text.index("]", pos)
        length = int(text[pos + len(ESC):close])
        start = close + 1
        return text[start:start + length], start + length
    match = _TOKEN.search(text, pos)
    end = match.start() if match else len(text)
    return text[pos:end], end


def delinearize(text: str) -> tuple[str, list[str], list[str], list[list[str]]]:
    """Parse delimited-tokens text back into ``(corner, col_headers, row_headers, cells)``."""
    corner, pos = _read_item(text, 0)
    headers = []
    while text.startswith(CELL, pos):
        h, pos = _read_item(text, pos + len(CELL))
        headers.append(h)
    if not text.startswith(SEP, pos):
        raise ValueError(f"expected {SEP} at offset {pos}")
    pos += len(SEP)
    row_headers, cells = [], []
    while pos < len(text):
        if not text.startswith(ROW, pos):
            raise ValueError(f"expected {ROW} at offset {pos}")
        r, pos = _read_item(text, pos + len(ROW))
        row = []
        while text.startswith(CELL, pos):
            c, pos = _read_item(text, pos + len(CELL))
            row.append(c)
        row_headers.append(r)
        cells.append(row)
    return corner, headers, row_headers, cells
