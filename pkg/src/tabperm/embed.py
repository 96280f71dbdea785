"""Per-cell embeddings from pluggable providers, and identity alignment.

A provider receives one :class:`ElementRequest` per table element and
returns a ``(len(requests), d)`` array. Mock providers read the structured
fields (value, headers, current position); the remote provider only sends
``request.text``.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import AlignmentError, DimensionError, ProtocolError, ProviderError
from .permute import PermutationPair, invert
from .serialize import DELIMITED, linearize
from .table import (COL_HEADER, DATA, ROW_HEADER, CellId, Table, canonical_cell_order,
                    col_header_id, row_header_id)

FULL_CONTEXT = "full-context"
LOCAL_CONTEXT = "local-context"
MODES = (FULL_CONTEXT, LOCAL_CONTEXT)


@dataclass(frozen=True)
class CellEmbeddingMatrix:
    """``rows[k]`` embeds element ``index[k]``."""

    rows: np.ndarray
    index: tuple[CellId, ...]
    provider_id: str
    mode: str

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        object.__setattr__(self, "index", tuple(self.index))
        if rows.ndim != 2 or rows.shape[0] != len(self.index):
            raise DimensionError(f"{rows.shape} rows for {len(self.index)} index entries")
        if len(set(self.index)) != len(self.index):
            raise DimensionError("duplicate CellId in embedding index")
        if not np.all(np.isfinite(rows)):
            raise ProtocolError("embedding matrix has non-finite entries")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def __len__(self):
        return len(self.index)

    def row_of(self, cid: CellId) -> np.ndarray:
        return self.rows[self.index.index(cid)]

    def lookup(self) -> dict[CellId, int]:
        return {cid: k for k, cid in enumerate(self.index)}

    def cells_only(self) -> "CellEmbeddingMatrix":
        keep = [k for k, cid in enumerate(self.index) if cid.kind == DATA]
        return CellEmbeddingMatrix(self.rows[keep], [self.index[k] for k in keep],
                                   self.provider_id, self.mode)

    def with_rows(self, rows, provider_id: str | None = None) -> "CellEmbeddingMatrix":
        return CellEmbeddingMatrix(rows, self.index, provider_id or self.provider_id, self.mode)

    def to_json(self) -> dict:
        return {"provider_id": self.provider_id, "mode": self.mode, "d": self.d,
                "index": [c.to_json() for c in self.index], "vectors": self.rows.tolist()}

    @classmethod
    def from_json(cls, obj) -> "CellEmbeddingMatrix":
        return cls(np.asarray(obj["vectors"], dtype=float),
                   [CellId.from_json(c) for c in obj["index"]], obj["provider_id"], obj["mode"])


@dataclass(frozen=True)
class ElementRequest:
    """One embedding request. ``cell`` is in the coordinates of the table as given."""

    cell: CellId
    value: str
    row_header: str | None
    col_header: str | None
    text: str


class EmbeddingProvider:
    kind = "abstract"

    @property
    def provider_id(self) -> str:
        raise NotImplementedError

    def embed_requests(self, requests: Sequence[ElementRequest]) -> np.ndarray:
        raise NotImplementedError


def _digest_seed(seed: int, text: str) -> int:
    h = hashlib.blake2b(f"{seed}\x00{text}".encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


class HashFeatures:
    """Deterministic Gaussian feature vector per string."""

    def __init__(self, dim: int, seed: int):
        self.dim, self.seed = int(dim), int(seed)
        self._f = lru_cache(maxsize=None)(self._compute)

    def _compute(self, text: str) -> np.ndarray:
        v = np.random.default_rng(_digest_seed(self.seed, text)).standard_normal(self.dim)
        v.setflags(write=False)
        return v

    def __call__(self, text: str) -> np.ndarray:
        return self._f(text)


class InvariantMock(EmbeddingProvider):
    """Embeds the element text alone: ``phi(x)`` with no table context at all."""

    kind = "mock-invariant"

    def __init__(self, dim: int = 32, seed: int = 0):
        self.dim, self.seed = dim, seed
        self.features = HashFeatures(dim, seed)

    @property
    def provider_id(self):
        return f"{self.kind}(d={self.dim},seed={self.seed})"

    def embed_requests(self, requests):
        return np.array([self.features("v:" + r.value) for r in requests]).reshape(-1, self.dim)


class ContextFreeMock(EmbeddingProvider):
    """Cell vector depends only on (value, row header, column header); layout-blind."""

    kind = "mock-context-free"

    def __init__(self, dim: int = 32, seed: int = 0):
        self.dim, self.seed = dim, seed
        self.features = HashFeatures(dim, seed)

    @property
    def provider_id(self):
        return f"{self.kind}(d={self.dim},seed={self.seed})"

    def content(self, r: ElementRequest) -> np.ndarray:
        f = self.features
        if r.cell.kind == DATA:
            return f("v:" + r.value) + f("r:" + r.row_header) + f("c:" + r.col_header)
        if r.cell.kind == ROW_HEADER:
            return f("r:" + r.value)
        return f("c:" + r.value)

    def embed_requests(self, requests):
        return np.array([self.content(r) for r in requests]).reshape(-1, self.dim)


class PositionalMock(ContextFreeMock):
    """Context-free content concatenated with ``weight`` times a CURRENT-position code.

    The code is ``p(row:i | key) + p(col:j | key)`` where ``key`` identifies the
    element (value and headers), so a pure layout change alters it. Keying by
    element keeps the position term from cancelling under mean pooling.
    """

    kind = "mock-positional"

    def __init__(self, dim: int = 32, seed: int = 0, weight: float = 1.0, pos_dim: int | None = None):
        super().__init__(dim, seed)
        if weight < 0:
            raise ValueError("position weight must be >= 0")
        self.weight = float(weight)
        self.pos_dim = int(pos_dim or dim)
        self.positions = HashFeatures(self.pos_dim, seed + 1)
        self._vectors: dict[tuple, np.ndarray] = {}

    @property
    def provider_id(self):
        return f"{self.kind}(d={self.dim},pos_d={self.pos_dim},weight={self.weight:g},seed={self.seed})"

    def position(self, r: ElementRequest) -> np.ndarray:
        p, cid = self.positions, r.cell
        if cid.kind == DATA:
            key = f"{r.value}\x00{r.row_header}\x00{r.col_header}"
            return p(f"row:{cid.row}|{key}") + p(f"col:{cid.col}|{key}")
        if cid.kind == ROW_HEADER:
            return p(f"row:{cid.row}|r:{r.value}")
        return p(f"col:{cid.col}|c:{r.value}")

    def vector(self, r: ElementRequest) -> np.ndarray:
        key = (r.cell, r.value, r.row_header, r.col_header)
        hit = self._vectors.get(key)
        if hit is None:
            pos = self.weight * self.position(r) if self.weight else np.zeros(self.pos_dim)
            hit = self._vectors[key] = np.concatenate([self.content(r), pos])
        return hit

    def embed_requests(self, requests):
        return np.array([self.vector(r) for r in requests]).reshape(-1, self.dim + self.pos_dim)


class RemoteProvider(EmbeddingProvider):
    """JSON-over-HTTP embedder: POST ``{"model", "input": [texts]}``.

    Accepts ``{"data": [{"embedding": [...]}, ...]}``, ``{"embeddings": [[...]]}``
    or ``{"embedding": [...]}`` (single input) responses. Every vector is
    cached under ``provider_id + text`` when a cache is given.
    """

    kind = "remote-api"

    def __init__(self, endpoint: str, model: str, *, api_key: str | None = None,
                 auth_header: str = "Authorization", auth_scheme: str = "Bearer",
                 timeout_ms: int = 30000, max_inflight: int = 4, batch_size: int = 16,
                 retries: int = 3, backoff_s: float = 0.5, cache=None, client=None):
        self.endpoint, self.model = endpoint, model
        self.api_key = api_key
        self.auth_header, self.auth_scheme = auth_header, auth_scheme
        self.timeout_s = timeout_ms / 1000
        self.max_inflight = max(1, int(max_inflight))
        self.batch_size = max(1, int(batch_size))
        self.retries = max(0, int(retries))
        self.backoff_s = backoff_s
        self.cache = cache
        self._client = client

    @property
    def provider_id(self):
        return f"remote:{self.model}@{self.endpoint}"

    def _headers(self):
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            value = f"{self.auth_scheme} {self.api_key}" if self.auth_scheme else self.api_key
            headers[self.auth_header] = value
        return headers

    @staticmethod
    def parse_response(payload, expected: int) -> list[list[float]]:
        if isinstance(payload, dict) and isinstance(payload.get("data"), list):
            items = sorted(payload["data"], key=lambda it: it.get("index", 0))
            vectors = [it["embedding"] for it in items]
        elif isinstance(payload, dict) and isinstance(payload.get("embeddings"), list):
            vectors = payload["embeddings"]
        elif isinstance(payload, dict) and isinstance(payload.get("embedding"), list) and expected == 1:
            vectors = [payload["embedding"]]
        else:
            raise ProtocolError("unrecognized embedding response shape")
        if len(vectors) != expected:
            raise ProtocolError(f"expected {expected} vectors, got {len(vectors)}")
        return vectors

    def _post(self, texts: list[str]) -> list[list[float]]:
        import httpx

        client = self._client or httpx.Client(timeout=self.timeout_s)
        last = None
        try:
            for attempt in range(self.retries + 1):
                try:
                    resp = client.post(self.endpoint, headers=self._headers(),
                                       content=json.dumps({"model": self.model, "input": texts}))
                    if resp.status_code >= 500 or resp.status_code == 429:
                        last = f"HTTP {resp.status_code}"
                    elif resp.status_code >= 400:
                        raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                    else:
                        return self.parse_response(resp.json(), len(texts))
                except (httpx.HTTPError, ValueError) as exc:
                    if isinstance(exc, ProviderError):
                        raise
                    last = f"{type(exc).__name__}: {exc}"
                if attempt < self.retries:
                    time.sleep(self.backoff_s * 2 ** attempt)
        finally:
            if self._client is None:
                client.close()
        raise ProviderError(f"request failed after {self.retries + 1} attempts ({last})")

    def embed_requests(self, requests):
        vectors: dict[int, np.ndarray] = {}
        pending: dict[str, list[int]] = {}
        for k, r in enumerate(requests):
            hit = self.cache.get(self.provider_id, r.text) if self.cache else None
            if hit is not None:
                vectors[k] = hit
            else:
                pending.setdefault(r.text, []).append(k)
        texts = list(pending)
        batches = [texts[i:i + self.batch_size] for i in range(0, len(texts), self.batch_size)]

        def run(batch):
            try:
                return batch, self._post(batch)
            except ProviderError as exc:
                first = requests[pending[batch[0]][0]].cell
                raise type(exc)(f"{exc} (first element {first})", cell=first) from exc

        with ThreadPoolExecutor(max_workers=self.max_inflight) as pool:
            for batch, result in pool.map(run, batches):
                for text, vec in zip(batch, result):
                    vec = np.asarray(vec, dtype=float)
                    if self.cache:
                        self.cache.put(self.provider_id, text, vec)
                    for k in pending[text]:
                        vectors[k] = vec
        dims = {v.shape for v in vectors.values()}
        if len(dims) > 1:
            raise ProtocolError(f"dimension drift across cells: {sorted(dims)}")
        return np.array([vectors[k] for k in range(len(requests))])


def local_text(cid: CellId, value: str, row_header: str | None, col_header: str | None) -> str:
    if cid.kind == DATA:
        return f"{col_header} | {row_header} | {value}"
    return value


def build_requests(table: Table, mode: str = LOCAL_CONTEXT, fmt: str = DELIMITED,
                   include_headers: bool = False) -> list[ElementRequest]:
    if mode not in MODES:
        raise ValueError(f"unknown embedding mode {mode!r}")
    ids = table.element_ids() if include_headers else canonical_cell_order(table)
    serialized = linearize(table, fmt) if mode == FULL_CONTEXT else None
    out = []
    for cid in ids:
        value = table.value(cid)
        rh = table.row_headers[cid.row] if cid.kind == DATA else None
        ch = table.col_headers[cid.col] if cid.kind == DATA else None
        text = serialized.marked(cid) if serialized else local_text(cid, value, rh, ch)
        out.append(ElementRequest(cid, value, rh, ch, text))
    return out


def embed_cells(table: Table, provider: EmbeddingProvider, mode: str = LOCAL_CONTEXT,
                fmt: str = DELIMITED, include_headers: bool = False) -> CellEmbeddingMatrix:
    """Embed every data cell (and optionally every header) of ``table`` as given."""
    requests = build_requests(table, mode, fmt, include_headers)
    try:
        rows = np.asarray(provider.embed_requests(requests), dtype=float)
    except ProviderError:
        raise
    except Exception as exc:  # provider bugs surface as provider errors
        raise ProviderError(f"{provider.provider_id} failed: {exc}") from exc
    if rows.ndim != 2 or rows.shape[0] != len(requests):
        raise ProtocolError(f"provider returned shape {rows.shape} for {len(requests)} requests")
    if not np.all(np.isfinite(rows)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(rows), axis=1))[0])
        raise ProtocolError(f"non-finite vector for {requests[bad].cell}", cell=requests[bad].cell)
    return CellEmbeddingMatrix(rows, [r.cell for r in requests], provider.provider_id, mode)


def _to_original(cid: CellId, inv_s, inv_t) -> CellId:
    if cid.kind == DATA:
        return CellId(inv_s[cid.row], inv_t[cid.col])
    if cid.kind == ROW_HEADER:
        return row_header_id(inv_s[cid.row])
    return col_header_id(inv_t[cid.col])


def _in_bounds(cid: CellId, n: int, m: int) -> bool:
    if cid.kind == DATA:
        return 0 <= cid.row < n and 0 <= cid.col < m
    if cid.kind == ROW_HEADER:
        return 0 <= cid.row < n
    return cid.kind == COL_HEADER and 0 <= cid.col < m


def _canonical_key(cid: CellId):
    rank = {DATA: 0, ROW_HEADER: 1, COL_HEADER: 2}[cid.kind]
    return rank, cid.row if cid.kind != COL_HEADER else 0, cid.col if cid.kind != ROW_HEADER else 0


def align_by_identity(matrix: CellEmbeddingMatrix, pair: PermutationPair) -> CellEmbeddingMatrix:
    """Reorder rows of an embedding of ``apply_action(T, pair)`` into ``T``'s canonical order.

    Afterwards row ``k`` embeds the same ORIGINAL element as row ``k`` of
    ``embed_cells(T)``, and the index is rewritten to original coordinates.
    """
    n, m = pair.shape
    for cid in matrix.index:
        if not _in_bounds(cid, n, m):
            raise AlignmentError(f"{cid} outside a {n}x{m} table")
    if sum(1 for c in matrix.index if c.kind == DATA) != n * m:
        raise AlignmentError(f"matrix has {len(matrix)} rows, pair expects {n * m} data cells")
    inv_s, inv_t = invert(pair.row_perm).mapping, invert(pair.col_perm).mapping
    original = [_to_original(c, inv_s, inv_t) for c in matrix.index]
    order = sorted(range(len(original)), key=lambda k: _canonical_key(original[k]))
    return CellEmbeddingMatrix(matrix.rows[order], [original[k] for k in order],
                               matrix.provider_id, matrix.mode)


def make_provider(kind: str, **kw) -> EmbeddingProvider:
    """Factory used by configs: ``mock-invariant``, ``mock-context-free``, ``mock-positional``, ``remote-api``."""
    if kind == InvariantMock.kind:
        return InvariantMock(kw.get("dim", 32), kw.get("seed", 0))
    if kind == ContextFreeMock.kind:
        return ContextFreeMock(kw.get("dim", 32), kw.get("seed", 0))
    if kind == PositionalMock.kind:
        return PositionalMock(kw.get("dim", 32), kw.get("seed", 0), kw.get("weight", 1.0),
                              kw.get("pos_dim"))
    if kind == RemoteProvider.kind:
        args = {k: v for k, v in kw.items() if k not in ("dim", "seed", "weight", "pos_dim")}
        return RemoteProvider(**args)
    raise ValueError(f"unknown provider kind {kind!r}")
