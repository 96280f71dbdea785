"""Linear HSIC/CKA, cosine similarity matrices, tie-corrected Spearman and slice AUC.

All numeric tolerances used by the library live here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateInputError, DimensionError

# relative Frobenius norm below which a centered matrix counts as constant
ZERO_VARIANCE_RTOL = 1e-12
# |CKA - 1| tolerated at the identity corner
IDENTITY_ATOL = 1e-9
# zero-norm guard for cosine rows
ZERO_NORM_ATOL = 1e-300


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    kind: str = "cka"

    def __float__(self):
        return self.value


def _as_matrix(x, name) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DegenerateInputError(f"{name} has non-finite entries")
    return x


def _check_pair(x, y):
    x, y = _as_matrix(x, "X"), _as_matrix(y, "Y")
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"sample counts differ: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 2:
        raise DegenerateInputError("HSIC needs at least two samples")
    return x, y


def center(x: np.ndarray) -> np.ndarray:
    return x - x.mean(axis=0, keepdims=True)


def hsic_linear(x, y) -> float:
    """Biased linear-kernel HSIC, ``||Yc^T Xc||_F^2 / (N-1)^2``."""
    x, y = _check_pair(x, y)
    n = x.shape[0]
    cross = center(y).T @ center(x)
    return float(np.sum(cross * cross)) / (n - 1) ** 2


def _is_constant(x: np.ndarray, xc: np.ndarray) -> bool:
    scale = max(1.0, float(np.linalg.norm(x)))
    return float(np.linalg.norm(xc)) <= ZERO_VARIANCE_RTOL * scale


def cka(x, y) -> float:
    """Linear CKA in ``[0, 1]``; raises on a zero-variance side."""
    x, y = _check_pair(x, y)
    xc, yc = center(x), center(y)
    for name, raw, c in (("X", x, xc), ("Y", y, yc)):
        if _is_constant(raw, c):
            raise DegenerateInputError(f"{name} has zero variance; CKA undefined")
    # the (N-1)^2 factors cancel
    xy = np.linalg.norm(yc.T @ xc) ** 2
    xx = np.linalg.norm(xc.T @ xc)
    yy = np.linalg.norm(yc.T @ yc)
    return float(np.clip(xy / (xx * yy), 0.0, 1.0))


def cosine_matrix(x, normalize: bool = False, index=None) -> np.ndarray:
    """Pairwise cosine similarities; ``normalize`` min-max rescales to ``[0, 1]``."""
    x = _as_matrix(x, "X")
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(norms <= ZERO_NORM_ATOL)
    if bad.size:
        who = index[bad[0]] if index is not None else int(bad[0])
        raise DegenerateInputError(f"zero-norm embedding row for {who}")
    u = x / norms[:, None]
    s = np.clip(u @ u.T, -1.0, 1.0)
    np.fill_diagonal(s, 1.0)
    s = (s + s.T) / 2
    if normalize:
        lo, hi = s.min(), s.max()
        s = np.ones_like(s) if hi - lo == 0 else (s - lo) / (hi - lo)
    return s


def spearman(xs, ys) -> float:
    """Average-rank Spearman correlation (Pearson correlation of tie-averaged ranks)."""
    xs, ys = np.asarray(xs, dtype=float).ravel(), np.asarray(ys, dtype=float).ravel()
    if xs.shape != ys.shape:
        raise DimensionError(f"length mismatch: {xs.size} vs {ys.size}")
    if xs.size < 2:
        raise DegenerateInputError("Spearman needs at least two points")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise DegenerateInputError("Spearman inputs must be finite")
    for name, v in (("xs", xs), ("ys", ys)):
        if np.all(v == v[0]):
            raise DegenerateInputError(f"{name} is constant; Spearman undefined")
    rx, ry = rankdata(xs) - (xs.size + 1) / 2, rankdata(ys) - (ys.size + 1) / 2
    rho = float(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)))
    return min(1.0, max(-1.0, rho))


def auc_slice(values) -> float:
    """Trapezoidal area over ``K+1`` equally spaced points, normalized by ``K``."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 2:
        raise DegenerateInputError("AUC needs at least two points")
    k = v.size - 1
    return float(np.sum((v[:-1] + v[1:]) / 2) / k)
