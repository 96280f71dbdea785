"""Header-cell contrastive refinement of context-free cell embeddings.

Each data cell is tied to its row and column header (a semantic meta-path,
SMP). A one-hidden-layer map ``psi`` is trained with a temperature-scaled
cross-entropy: for anchor cell ``c`` and each positive header ``p``::

    loss(c, p) = -s(c,p)/t + log(exp(s(c,p)/t) + sum_k exp(s(c,n_k)/t))

with ``s`` the cosine of refined vectors and ``n_k`` elements sampled from
other SMPs. Headers pass through the same ``psi``, so gradients reach both
ends of every pull.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .embed import CellEmbeddingMatrix, EmbeddingProvider
from .errors import DimensionError, DomainError, TrainingDivergenceError
from .table import CellId, Table, col_header_id, row_header_id

PARAMS_SCHEMA = "refiner-params/1"
ACTIVATIONS = ("tanh", "identity")
_EPS = 1e-12


class SemanticMetaPath(NamedTuple):
    cell: CellId
    row_header: CellId
    col_header: CellId


def extract_smps(table: Table) -> list[SemanticMetaPath]:
    return [SemanticMetaPath(CellId(i, j), row_header_id(i), col_header_id(j))
            for i in range(table.n) for j in range(table.m)]


@dataclass(frozen=True)
class RefinerConfig:
    epochs: int = 50
    lr: float = 0.1
    momentum: float = 0.9
    temperature: float = 0.1
    negatives: int = 8
    hidden: int = 64
    d_out: int = 32
    batch_size: int = 32
    activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.d_out < 2:
            raise ValueError("d_out must be >= 2")
        if self.temperature <= 0 or self.lr <= 0:
            raise ValueError("temperature and lr must be positive")
        if self.epochs < 0 or self.negatives < 0 or self.batch_size < 1 or self.hidden < 1:
            raise ValueError("epochs and negatives must be >= 0, batch_size and hidden >= 1")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")


@dataclass
class RefinerParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    activation: str = "tanh"
    config: RefinerConfig = field(default_factory=RefinerConfig)

    NAMES = ("w1", "b1", "w2", "b2")

    @property
    def d_in(self) -> int:
        return self.w1.shape[1]

    @property
    def d_out(self) -> int:
        return self.w2.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in self.NAMES}

    def copy(self) -> "RefinerParams":
        return RefinerParams(*(a.copy() for a in self.arrays().values()), self.activation, self.config)

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.activation.encode())
        for a in self.arrays().values():
            h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
        return h.hexdigest()[:12]

    @classmethod
    def initialize(cls, d_in: int, config: RefinerConfig) -> "RefinerParams":
        rng = np.random.default_rng(config.seed)
        return cls(rng.standard_normal((config.hidden, d_in)) / np.sqrt(d_in),
                   np.zeros(config.hidden),
                   rng.standard_normal((config.d_out, config.hidden)) / np.sqrt(config.hidden),
                   np.zeros(config.d_out), config.activation, config)

    @classmethod
    def identity(cls, d: int, activation: str = "identity") -> "RefinerParams":
        cfg = RefinerConfig(hidden=d, d_out=d, activation=activation)
        return cls(np.eye(d), np.zeros(d), np.eye(d), np.zeros(d), activation, cfg)

    def to_json(self) -> dict:
        return {
            "schema": PARAMS_SCHEMA,
            "activation": self.activation,
            "d_in": self.d_in,
            "d_out": self.d_out,
            "fingerprint": self.fingerprint(),
            "config": asdict(self.config),
            "weights": {k: {"shape": list(a.shape), "data": a.ravel().tolist()}
                        for k, a in self.arrays().items()},
        }

    @classmethod
    def from_json(cls, obj) -> "RefinerParams":
        if obj.get("schema") != PARAMS_SCHEMA:
            raise DomainError(f"unsupported params schema {obj.get('schema')!r}")
        w = {k: np.asarray(v["data"], dtype=float).reshape(v["shape"]) for k, v in obj["weights"].items()}
        return cls(w["w1"], w["b1"], w["w2"], w["b2"], obj["activation"],
                   RefinerConfig(**obj["config"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _normalize_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms <= _EPS):
        raise DomainError("zero-norm row cannot be normalized")
    return x / norms, norms


def forward(params: RefinerParams, x: np.ndarray):
    """Refined unit vectors and the intermediates needed by :func:`backward`."""
    xh, _ = _normalize_rows(np.asarray(x, dtype=float))
    pre = xh @ params.w1.T + params.b1
    h = np.tanh(pre) if params.activation == "tanh" else pre
    u = h @ params.w2.T + params.b2
    z, r = _normalize_rows(u)
    return z, (xh, h, z, r)


def backward(params: RefinerParams, cache, grad_z: np.ndarray) -> dict[str, np.ndarray]:
    xh, h, z, r = cache
    grad_u = (grad_z - z * np.sum(z * grad_z, axis=1, keepdims=True)) / r
    grads = {"w2": grad_u.T @ h, "b2": grad_u.sum(axis=0)}
    grad_h = grad_u @ params.w2
    grad_pre = grad_h * (1.0 - h * h) if params.activation == "tanh" else grad_h
    grads["w1"] = grad_pre.T @ xh
    grads["b1"] = grad_pre.sum(axis=0)
    return grads


def _logsumexp(a: np.ndarray) -> np.ndarray:
    mx = a.max(axis=1, keepdims=True)
    return (mx + np.log(np.exp(a - mx).sum(axis=1, keepdims=True)))[:, 0]


def contrastive_loss(params: RefinerParams, x: np.ndarray, anchors: np.ndarray,
                     positives: np.ndarray, negatives: np.ndarray, temperature: float,
                     with_grad: bool = True):
    """Mean loss over (anchor, positive) pairs, and parameter gradients.

    ``anchors`` (B,), ``positives`` (B, P) and ``negatives`` (B, K) index rows of ``x``.
    """
    z, cache = forward(params, x)
    za, zp, zn = z[anchors], z[positives], z[negatives]
    t = temperature
    sp = np.einsum("bd,bjd->bj", za, zp) / t
    sn = np.einsum("bd,bkd->bk", za, zn) / t
    nb, npos = sp.shape
    scale = 1.0 / (nb * npos)
    total = 0.0
    g_sp = np.zeros_like(sp)
    g_sn = np.zeros_like(sn)
    for j in range(npos):
        logits = np.concatenate([sp[:, j:j + 1], sn], axis=1)
        lse = _logsumexp(logits)
        total += float(np.sum(lse - sp[:, j]))
        prob = np.exp(logits - lse[:, None])
        g_sp[:, j] = (prob[:, 0] - 1.0) * scale
        g_sn += prob[:, 1:] * scale
    loss = total * scale
    if not with_grad:
        return loss, None
    grad_z = np.zeros_like(z)
    np.add.at(grad_z, anchors, (np.einsum("bj,bjd->bd", g_sp, zp) + np.einsum("bk,bkd->bd", g_sn, zn)) / t)
    np.add.at(grad_z, positives, g_sp[:, :, None] * za[:, None, :] / t)
    np.add.at(grad_z, negatives, g_sn[:, :, None] * za[:, None, :] / t)
    return loss, backward(params, cache, grad_z)


def _smp_indices(base: CellEmbeddingMatrix, smps: Sequence[SemanticMetaPath]):
    if not smps:
        raise DomainError("no semantic meta-paths to train on")
    lookup = base.lookup()
    try:
        idx = np.array([[lookup[s.cell], lookup[s.row_header], lookup[s.col_header]] for s in smps])
    except KeyError as exc:
        raise DomainError(f"base embedding has no vector for {exc.args[0]}") from None
    return idx


def sample_negatives(idx: np.ndarray, n_elements: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` uniform draws (with replacement) per row, excluding the row's own SMP members."""
    excl = np.sort(idx, axis=1)
    pool = n_elements - excl.shape[1]
    if pool <= 0 or k == 0:
        return np.zeros((idx.shape[0], 0), dtype=np.intp)
    r = rng.integers(0, pool, size=(idx.shape[0], k))
    for c in range(excl.shape[1]):
        r += r >= excl[:, c:c + 1]
    return r


def train_refiner(base: CellEmbeddingMatrix, smps: Sequence[SemanticMetaPath],
                  config: RefinerConfig | None = None, params: RefinerParams | None = None
                  ) -> tuple[RefinerParams, list[float]]:
    """Seeded mini-batch SGD (with momentum) on the header-cell contrastive loss.

    Returns the trained parameters and the per-epoch mean loss.
    """
    config = config or RefinerConfig()
    idx = _smp_indices(base, smps)
    params = params.copy() if params is not None else RefinerParams.initialize(base.d, config)
    if params.d_in != base.d:
        raise DimensionError(f"params expect d_in={params.d_in}, base has d={base.d}")
    rng = np.random.default_rng(config.seed + 1)
    x = base.rows
    velocity = {k: np.zeros_like(a) for k, a in params.arrays().items()}
    trace: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(idx))
        total, count = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = idx[order[start:start + config.batch_size]]
            neg = sample_negatives(batch, len(x), config.negatives, rng)
            loss, grads = contrastive_loss(params, x, batch[:, 0], batch[:, 1:], neg,
                                           config.temperature)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingDivergenceError(f"non-finite loss at epoch {epoch}", epoch=epoch)
            for k, g in grads.items():
                velocity[k] = config.momentum * velocity[k] - config.lr * g
                setattr(params, k, getattr(params, k) + velocity[k])
            if not all(np.all(np.isfinite(a)) for a in params.arrays().values()):
                raise TrainingDivergenceError(f"non-finite parameters at epoch {epoch}", epoch=epoch)
            total += loss * len(batch)
            count += len(batch)
        trace.append(total / count)
    return params, trace


def evaluate_loss(params: RefinerParams, base: CellEmbeddingMatrix,
                  smps: Sequence[SemanticMetaPath], negatives: int = 8, temperature: float = 0.1,
                  seed: int = 0) -> float:
    """Full-batch loss with a fixed, seeded negative draw (for before/after comparisons)."""
    idx = _smp_indices(base, smps)
    neg = sample_negatives(idx, len(base), negatives, np.random.default_rng(seed))
    loss, _ = contrastive_loss(params, base.rows, idx[:, 0], idx[:, 1:], neg, temperature,
                               with_grad=False)
    return loss


def refine(base: CellEmbeddingMatrix, params: RefinerParams) -> CellEmbeddingMatrix:
    if base.d != params.d_in:
        raise DimensionError(f"base has d={base.d}, params expect d_in={params.d_in}")
    z, _ = forward(params, base.rows)
    return CellEmbeddingMatrix(z, base.index, f"refined[{base.provider_id}]#{params.fingerprint()}",
                               base.mode)


def alignment_score(refined: CellEmbeddingMatrix, smps: Sequence[SemanticMetaPath],
                    foreign: int = 8, seed: int = 0) -> float:
    """Mean cosine to own headers minus mean cosine to sampled foreign headers."""
    idx = _smp_indices(refined, smps)
    lookup = refined.lookup()
    u, _ = _normalize_rows(refined.rows)
    rng = np.random.default_rng(seed)
    row_headers = sorted((c for c in refined.index if c.kind == "row-header"))
    col_headers = sorted((c for c in refined.index if c.kind == "col-header"))
    pos, neg = [], []
    for s, (ci, ri, hi) in zip(smps, idx):
        pos += [u[ci] @ u[ri], u[ci] @ u[hi]]
        cands = [lookup[c] for c in row_headers if c.row != s.cell.row]
        cands += [lookup[c] for c in col_headers if c.col != s.cell.col]
        if cands:
            pick = rng.choice(len(cands), size=min(foreign, len(cands)), replace=False)
            neg += [u[ci] @ u[cands[p]] for p in pick]
    return float(np.mean(pos) - (np.mean(neg) if neg else 0.0))


class RefinedProvider(EmbeddingProvider):
    """Run a base provider, then ``psi`` row-wise; plugs into sweeps like any provider."""

    kind = "refined"

    def __init__(self, base: EmbeddingProvider, params: RefinerParams):
        self.base, self.params = base, params

    @property
    def provider_id(self):
        return f"refined[{self.base.provider_id}]#{self.params.fingerprint()}"

    def embed_requests(self, requests):
        rows = np.asarray(self.base.embed_requests(requests), dtype=float)
        z, _ = forward(self.params, rows)
        return z
