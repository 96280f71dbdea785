"""Platonic sweeps: heatmap over the permutation bench, scalar summaries, corpus aggregation,
and the permuted-variant retrieval probe."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import metrics
from .embed import (LOCAL_CONTEXT, CellEmbeddingMatrix, EmbeddingProvider, align_by_identity,
                    embed_cells)
from .errors import (AlignmentError, DegenerateInputError, DomainError, SchemaVersionError,
                     SweepError, TabPermError)
from .permute import apply_action, grid_pair, hash64
from .serialize import DELIMITED
from .table import Table

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "platonic-report/1"
HEATMAP_SCHEMA = "platonic-heatmap/1"
SUMMARY_SCHEMA = "platonic-summary/1"
UNDEFINED_CONSTANT = "undefined: constant"

# (metric, axis) pairs in summary column order
SUMMARY_COLUMNS = (
    ("rho_mono", "rows"), ("rho_mono", "cols"), ("rho_mono", "all"),
    ("pi_derange", "rows"), ("pi_derange", "cols"), ("pi_derange", "all"),
    ("auc", "rows"), ("auc", "cols"),
)


def repeat_seed(seed: int, r: int) -> int:
    return seed if r == 0 else hash64(seed, r)


@dataclass
class PlatonicHeatmap:
    """``grid[a, b]`` = CKA between the original embedding and the aligned ``T_a^b`` embedding.

    Failed entries are NaN and listed in ``annotations``. With ``repeats > 1``
    the grid is the mean over repeats and ``std`` holds the spread.
    """

    grid: np.ndarray
    row_fallback: tuple[bool, ...]
    col_fallback: tuple[bool, ...]
    provenance: dict
    std: np.ndarray | None = None
    annotations: list[dict] = field(default_factory=list)
    timing: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.grid.shape[0] - 1

    @property
    def m(self) -> int:
        return self.grid.shape[1] - 1

    @property
    def fallback_flags(self) -> np.ndarray:
        return np.logical_or.outer(np.asarray(self.row_fallback), np.asarray(self.col_fallback))

    def to_json(self, timing: bool = False) -> dict:
        out = {
            "schema": HEATMAP_SCHEMA,
            "n": self.n,
            "m": self.m,
            "provenance": self.provenance,
            "grid": _nan_to_none(self.grid),
            "row_fallback": list(self.row_fallback),
            "col_fallback": list(self.col_fallback),
            "annotations": self.annotations,
        }
        if self.std is not None:
            out["std"] = _nan_to_none(self.std)
        if timing and self.timing is not None:
            out["timing_s"] = self.timing.tolist()
        return out

    @classmethod
    def from_json(cls, obj) -> "PlatonicHeatmap":
        std = obj.get("std")
        timing = obj.get("timing_s")
        return cls(
            grid=_none_to_nan(obj["grid"]),
            row_fallback=tuple(obj["row_fallback"]),
            col_fallback=tuple(obj["col_fallback"]),
            provenance=dict(obj["provenance"]),
            std=None if std is None else _none_to_nan(std),
            annotations=list(obj.get("annotations", [])),
            timing=None if timing is None else np.asarray(timing, dtype=float),
        )


def _nan_to_none(a: np.ndarray) -> list:
    return [[None if np.isnan(v) else float(v) for v in row] for row in np.asarray(a)]


def _none_to_nan(rows) -> np.ndarray:
    return np.array([[np.nan if v is None else v for v in row] for row in rows], dtype=float)


def platonic_heatmap(table: Table, provider: EmbeddingProvider, mode: str = LOCAL_CONTEXT,
                     seed: int = 0, *, fmt: str = DELIMITED, repeats: int = 1,
                     max_workers: int = 1, reference: EmbeddingProvider | None = None,
                     table_id: str | None = None, extra_provenance: dict | None = None
                     ) -> PlatonicHeatmap:
    """Fill ``H[a, b]`` for every entry of the ``(n+1) x (m+1)`` bench.

    ``reference`` embeds the original table instead of ``provider`` (the
    cross-model setting); by default both sides use ``provider``.
    """
    if repeats < 1:
        raise DomainError("repeats must be >= 1")
    n, m = table.shape
    x = embed_cells(table, reference or provider, mode, fmt)
    provenance = {
        "table_id": table_id or table.name or "table",
        "n": n,
        "m": m,
        "provider_id": provider.provider_id,
        "reference_provider_id": (reference or provider).provider_id,
        "mode": mode,
        "seed": seed,
        "repeats": repeats,
        "serialization": fmt,
        "row_headers": "synthetic" if table.synthetic_row_headers else "column-0",
        "alignment": "cell-identity",
        "cka": "linear, biased HSIC",
    }
    provenance.update(extra_provenance or {})

    def one(job):
        a, b, r = job
        pair = grid_pair(n, m, a, b, repeat_seed(seed, r))
        t0 = time.perf_counter()
        try:
            y = align_by_identity(embed_cells(apply_action(table, pair), provider, mode, fmt), pair)
            value, err = metrics.cka(x.rows, y.rows), None
        except TabPermError as exc:
            value, err = np.nan, f"{type(exc).__name__}: {exc}"
        return a, b, r, value, err, time.perf_counter() - t0, pair.row_perm.fallback, pair.col_perm.fallback

    jobs = [(a, b, r) for a in range(n + 1) for b in range(m + 1) for r in range(repeats)]
    values = np.full((repeats, n + 1, m + 1), np.nan)
    timing = np.zeros((n + 1, m + 1))
    row_fb, col_fb = [False] * (n + 1), [False] * (m + 1)
    annotations = []
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    for a, b, r, value, err, dt, rfb, cfb in results:
        values[r, a, b] = value
        timing[a, b] += dt
        row_fb[a] = row_fb[a] or rfb
        col_fb[b] = col_fb[b] or cfb
        if err:
            annotations.append({"a": a, "b": b, "repeat": r, "error": err})
    grid = values.mean(axis=0) if repeats > 1 else values[0]
    std = values.std(axis=0) if repeats > 1 else None
    if np.isnan(grid[0, 0]):
        raise SweepError(f"H[0,0] could not be computed; PI_derange undefined ({annotations[:1]})")
    if reference is None and abs(grid[n, m] - 1.0) > metrics.IDENTITY_ATOL:
        annotations.append({"a": n, "b": m, "warning": f"identity corner is {grid[n, m]!r}, "
                            "provider is not deterministic"})
    return PlatonicHeatmap(grid, tuple(row_fb), tuple(col_fb), provenance, std, annotations, timing)


@dataclass
class AxisSummary:
    """One restoration slice: rows restored (``H[a, b*]``) or columns restored (``H[a*, b]``)."""

    fixed_index: int
    values: list
    pi_derange: float | None
    rho_mono: float | None
    auc: float | None
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"fixed_index": self.fixed_index, "values": self.values,
                "pi_derange": self.pi_derange, "rho_mono": self.rho_mono, "auc": self.auc,
                "notes": self.notes}

    @classmethod
    def from_json(cls, obj) -> "AxisSummary":
        return cls(obj["fixed_index"], obj["values"], obj["pi_derange"], obj["rho_mono"],
                   obj["auc"], list(obj.get("notes", [])))


@dataclass
class SweepReport:
    table_id: str
    pi_derange: float
    rho_mono: float | None
    rows: AxisSummary
    cols: AxisSummary
    heatmap: PlatonicHeatmap
    annotations: list[str] = field(default_factory=list)

    @property
    def provenance(self) -> dict:
        return self.heatmap.provenance

    def metric(self, name: str, axis: str):
        if axis == "all":
            return self.pi_derange if name == "pi_derange" else (
                self.rho_mono if name == "rho_mono" else None)
        return getattr(getattr(self, axis), name)

    def to_json(self, timing: bool = False) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "table_id": self.table_id,
            "provenance": self.heatmap.provenance,
            "pi_derange": self.pi_derange,
            "rho_mono": self.rho_mono,
            "axis": {"rows": self.rows.to_json(), "cols": self.cols.to_json()},
            "annotations": self.annotations,
            "heatmap": self.heatmap.to_json(timing=timing),
        }

    @classmethod
    def from_json(cls, obj) -> "SweepReport":
        if obj.get("schema") != REPORT_SCHEMA:
            raise SchemaVersionError(f"unsupported report schema {obj.get('schema')!r}")
        return cls(obj["table_id"], obj["pi_derange"], obj["rho_mono"],
                   AxisSummary.from_json(obj["axis"]["rows"]),
                   AxisSummary.from_json(obj["axis"]["cols"]),
                   PlatonicHeatmap.from_json(obj["heatmap"]), list(obj.get("annotations", [])))


def _spearman_or_note(values, regressor, label, notes):
    v, r = np.asarray(values, dtype=float), np.asarray(regressor, dtype=float)
    ok = ~np.isnan(v)
    if ok.sum() < v.size:
        notes.append(f"{label}: {int(v.size - ok.sum())} null entries excluded")
    try:
        return metrics.spearman(v[ok], r[ok])
    except DegenerateInputError:
        if ok.sum() >= 2 and np.all(v[ok] == v[ok][0]):
            notes.append(f"{label}: {UNDEFINED_CONSTANT}")
        else:
            notes.append(f"{label}: undefined (too few entries)")
        return None


def _axis(values, fixed, label) -> AxisSummary:
    v = np.asarray(values, dtype=float)
    notes: list[str] = []
    rho = _spearman_or_note(v, np.arange(v.size), f"rho_mono[{label}]", notes)
    if np.any(np.isnan(v)):
        auc = None
        notes.append(f"auc[{label}]: slice has null entries")
    else:
        auc = metrics.auc_slice(v)
    pi = None if np.isnan(v[0]) else float(v[0])
    return AxisSummary(int(fixed), [None if np.isnan(x) else float(x) for x in v], pi, rho, auc, notes)


def summarize(heatmap: PlatonicHeatmap, row_slice_b: int | None = None,
              col_slice_a: int | None = None) -> SweepReport:
    """Scalar summaries of a heatmap; a pure function of the stored grid.

    Row restoration uses the slice ``H[:, row_slice_b]`` (default ``b = m``),
    column restoration ``H[col_slice_a, :]`` (default ``a = n``).
    """
    g = heatmap.grid
    n, m = heatmap.n, heatmap.m
    row_b = m if row_slice_b is None else row_slice_b
    col_a = n if col_slice_a is None else col_slice_a
    if not (0 <= row_b <= m and 0 <= col_a <= n):
        raise DomainError(f"slice indices ({row_b}, {col_a}) outside a {n + 1}x{m + 1} heatmap")
    if np.isnan(g[0, 0]):
        raise SweepError("H[0,0] is null; PI_derange undefined")
    notes: list[str] = []
    a_idx, b_idx = np.indices(g.shape)
    rho = _spearman_or_note(g.ravel(), (a_idx + b_idx).ravel(), "rho_mono[all]", notes)
    rows = _axis(g[:, row_b], row_b, "rows")
    cols = _axis(g[col_a, :], col_a, "cols")
    notes += [f"gap at H[{e['a']},{e['b']}]: {e['error']}" for e in heatmap.annotations if "error" in e]
    return SweepReport(heatmap.provenance.get("table_id", "table"), float(g[0, 0]), rho,
                       rows, cols, heatmap, notes)


def compare_models(matrix_a: CellEmbeddingMatrix, matrix_b: CellEmbeddingMatrix) -> metrics.SimilarityScore:
    """CKA between two embeddings of the same table from different sources."""
    if matrix_a.index != matrix_b.index:
        raise AlignmentError("embedding matrices do not share a cell index")
    return metrics.SimilarityScore(metrics.cka(matrix_a.rows, matrix_b.rows), "cka")


@dataclass(frozen=True)
class MetricStat:
    mean: float | None
    std: float | None
    count: int
    excluded: int

    def to_json(self):
        return {"mean": self.mean, "std": self.std, "count": self.count, "excluded": self.excluded}


@dataclass
class CorpusSummary:
    stats: dict[tuple[str, str], MetricStat]
    n_reports: int
    group: dict = field(default_factory=dict)

    def __getitem__(self, key) -> MetricStat:
        return self.stats[key]

    def to_json(self) -> dict:
        return {
            "schema": SUMMARY_SCHEMA,
            "group": self.group,
            "n_reports": self.n_reports,
            "columns": [f"{name}.{axis}" for name, axis in SUMMARY_COLUMNS],
            "metrics": {f"{name}.{axis}": self.stats[(name, axis)].to_json()
                        for name, axis in SUMMARY_COLUMNS},
        }


def aggregate(reports: Sequence[SweepReport], group: dict | None = None) -> CorpusSummary:
    """Mean and population std of every summary column; undefined entries are counted, not used."""
    if not reports:
        raise DomainError("cannot aggregate an empty list of reports")
    stats = {}
    for name, axis in SUMMARY_COLUMNS:
        vals = [r.metric(name, axis) for r in reports]
        defined = sorted(float(v) for v in vals if v is not None)
        if defined:
            arr = np.asarray(defined)
            stats[(name, axis)] = MetricStat(float(arr.mean()), float(arr.std()), arr.size,
                                             len(vals) - arr.size)
        else:
            stats[(name, axis)] = MetricStat(None, None, 0, len(vals))
    return CorpusSummary(stats, len(reports), dict(group or {}))


@dataclass
class ProbeStats:
    self_retrieval: float
    mrr: float
    topk_overlap: float
    k: int
    n_tables: int
    excluded: list[str]
    ranks: list[int]
    provenance: dict

    def to_json(self) -> dict:
        return {"schema": "platonic-probe/1", "self_retrieval": self.self_retrieval,
                "mrr": self.mrr, "topk_overlap": self.topk_overlap, "k": self.k,
                "n_tables": self.n_tables, "excluded": self.excluded, "ranks": self.ranks,
                "provenance": self.provenance}


def _ranking(sims: np.ndarray) -> np.ndarray:
    # descending similarity, ties broken by ascending table position
    return np.lexsort((np.arange(sims.size), -sims))


def retrieval_probe(corpus: Sequence[Table], provider: EmbeddingProvider, k: int = 1,
                    seed: int = 0, mode: str = LOCAL_CONTEXT, fmt: str = DELIMITED) -> ProbeStats:
    """Does a fully deranged copy of each table retrieve its own original?

    Table vector = unweighted mean of its cell vectors. The variant's
    vectors are summed in original-identity order so pooling is bit-stable.
    """
    if len(corpus) < 2:
        raise DomainError("retrieval probe needs at least two tables")
    if not 1 <= k < len(corpus):
        raise DomainError(f"k must be in [1, {len(corpus) - 1}], got {k}")
    ids = [t.name or f"table_{i}" for i, t in enumerate(corpus)]
    originals, variants, excluded, keep = [], [], [], []
    for i, table in enumerate(corpus):
        pair = grid_pair(table.n, table.m, 0, 0, hash64(seed, i))
        x = embed_cells(table, provider, mode, fmt).rows.mean(axis=0)
        y = align_by_identity(embed_cells(apply_action(table, pair), provider, mode, fmt),
                              pair).rows.mean(axis=0)
        if np.linalg.norm(x) == 0 or np.linalg.norm(y) == 0:
            excluded.append(ids[i])
            continue
        keep.append(i)
        originals.append(x / np.linalg.norm(x))
        variants.append(y / np.linalg.norm(y))
    if len(keep) < 2:
        raise DomainError("fewer than two tables with non-zero vectors")
    orig, var = np.array(originals), np.array(variants)
    kk = min(k, len(keep) - 1)
    hits, rr, overlap, ranks = 0, 0.0, 0.0, []
    for q in range(len(keep)):
        order_v = _ranking(orig @ var[q])
        order_o = _ranking(orig @ orig[q])
        rank = int(np.flatnonzero(order_v == q)[0]) + 1
        ranks.append(rank)
        hits += rank == 1
        rr += 1.0 / rank
        overlap += len(set(order_v[:kk]) & set(order_o[:kk])) / kk
    total = len(keep)
    return ProbeStats(hits / total, rr / total, overlap / total, kk, total, excluded, ranks,
                      {"provider_id": provider.provider_id, "mode": mode, "seed": seed,
                       "pooling": "mean", "similarity": "cosine", "variant": "full derangement"})
