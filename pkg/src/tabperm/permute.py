"""Row/column group action on tables and the fixed-point-controlled permutation bench.

Seed derivation is stable across runs and platforms: :func:`hash64` folds
integers through the SplitMix64 finalizer, and every grid entry ``(a, b)``
draws its row permutation from ``hash64(master, a, b, 0)`` and its column
permutation from ``hash64(master, a, b, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, DomainError
from .table import Table

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def hash64(*values: int) -> int:
    """Mix integers into one 64-bit seed: ``h = splitmix64(h ^ v)`` from ``h = 0``."""
    h = 0
    for v in values:
        h = splitmix64(h ^ (int(v) & MASK64))
    return h


@dataclass(frozen=True)
class Permutation:
    """A bijection on ``{0..k-1}``; ``mapping[i]`` is the image of ``i``.

    ``fallback`` is True when an exact fixed-point target could not be met
    and the identity was returned instead (targets ``k-1`` and ``k``).
    """

    mapping: tuple[int, ...]
    seed: int | None = None
    fallback: bool = False

    def __post_init__(self):
        mapping = tuple(int(x) for x in self.mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise DomainError(f"not a bijection: {mapping}")
        object.__setattr__(self, "mapping", mapping)

    def __len__(self):
        return len(self.mapping)

    @property
    def fix_count(self) -> int:
        return sum(1 for i, p in enumerate(self.mapping) if i == p)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.mapping, dtype=np.intp)

    def __call__(self, i: int) -> int:
        return self.mapping[i]

    def to_json(self) -> dict:
        return {"mapping": list(self.mapping), "fix_count": self.fix_count,
                "seed": self.seed, "fallback": self.fallback}


def identity(k: int, seed: int | None = None, fallback: bool = False) -> Permutation:
    return Permutation(tuple(range(k)), seed=seed, fallback=fallback)


def invert(perm: Permutation) -> Permutation:
    inv = [0] * len(perm)
    for i, p in enumerate(perm.mapping):
        inv[p] = i
    return Permutation(tuple(inv), seed=perm.seed, fallback=perm.fallback)


def compose(p: Permutation, q: Permutation) -> Permutation:
    """``p o q``: apply ``q`` first, then ``p``."""
    if len(p) != len(q):
        raise DimensionError(f"cannot compose permutations of lengths {len(p)} and {len(q)}")
    return Permutation(tuple(p.mapping[i] for i in q.mapping))


@dataclass(frozen=True)
class PermutationPair:
    """Element ``(sigma, tau)`` of S_n x S_m with the fixed-point targets it was drawn for."""

    row_perm: Permutation
    col_perm: Permutation
    a: int | None = None
    b: int | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_perm), len(self.col_perm)

    @property
    def fallback(self) -> bool:
        return self.row_perm.fallback or self.col_perm.fallback

    def inverse(self) -> "PermutationPair":
        return PermutationPair(invert(self.row_perm), invert(self.col_perm))

    def __matmul__(self, other: "PermutationPair") -> "PermutationPair":
        return PermutationPair(compose(self.row_perm, other.row_perm),
                               compose(self.col_perm, other.col_perm))

    def to_json(self) -> dict:
        return {"a": self.a, "b": self.b, "rows": self.row_perm.to_json(),
                "cols": self.col_perm.to_json()}


def identity_pair(n: int, m: int) -> PermutationPair:
    return PermutationPair(identity(n), identity(m), n, m)


def apply_action(table: Table, pair: PermutationPair) -> Table:
    """Move cell ``(i, j)`` to ``(sigma(i), tau(j))``; headers travel with their row/column."""
    sigma, tau = pair.row_perm.mapping, pair.col_perm.mapping
    if (len(sigma), len(tau)) != table.shape:
        raise DimensionError(
            f"permutation pair of shape {(len(sigma), len(tau))} cannot act on a "
            f"{table.n}x{table.m} table")
    inv_s = invert(pair.row_perm).mapping
    inv_t = invert(pair.col_perm).mapping
    cells = [[table.cells[inv_s[p]][inv_t[q]] for q in range(table.m)] for p in range(table.n)]
    return Table(
        col_headers=[table.col_headers[inv_t[q]] for q in range(table.m)],
        row_headers=[table.row_headers[inv_s[p]] for p in range(table.n)],
        cells=cells,
        caption=table.caption,
        corner=table.corner,
        synthetic_row_headers=table.synthetic_row_headers,
        name=table.name,
    )


def _derangement(k: int, rng: np.random.Generator) -> np.ndarray:
    # rejection is uniform over derangements; acceptance rate -> 1/e
    while True:
        p = rng.permutation(k)
        if not np.any(p == np.arange(k)):
            return p


def sample_derangement(k: int, seed: int) -> Permutation:
    if k < 2:
        raise DomainError(f"no derangement exists for k={k}")
    rng = np.random.default_rng(seed)
    return Permutation(tuple(_derangement(k, rng)), seed=seed)


def sample_fixed_point_perm(k: int, f: int, seed: int) -> Permutation:
    """Permutation of length ``k`` with exactly ``f`` fixed points, chosen at random.

    When fewer than two indices remain to move (``f >= k - 1``) no such
    permutation exists for ``f = k - 1``; the identity is returned with
    ``fallback=True`` in both cases.
    """
    if k < 1:
        raise DomainError(f"length must be positive, got {k}")
    if not 0 <= f <= k:
        raise DomainError(f"fixed-point target {f} outside [0, {k}]")
    if k - f <= 1:
        return identity(k, seed=seed, fallback=True)
    rng = np.random.default_rng(seed)
    moved = np.sort(rng.choice(k, size=k - f, replace=False))
    mapping = np.arange(k)
    mapping[moved] = moved[_derangement(len(moved), rng)]
    return Permutation(tuple(mapping), seed=seed)


class GridEntry(NamedTuple):
    a: int
    b: int
    pair: PermutationPair
    table: Table


def grid_pair(n: int, m: int, a: int, b: int, seed: int) -> PermutationPair:
    cell_seed = hash64(seed, a, b)
    return PermutationPair(
        sample_fixed_point_perm(n, a, hash64(cell_seed, 0)),
        sample_fixed_point_perm(m, b, hash64(cell_seed, 1)),
        a, b)


def build_grid(table: Table, seed: int) -> list[GridEntry]:
    """The ``(n+1)(m+1)`` bench ``T_a^b``, ordered by ``a`` then ``b``."""
    n, m = table.shape
    out = []
    for a in range(n + 1):
        for b in range(m + 1):
            pair = grid_pair(n, m, a, b, seed)
            out.append(GridEntry(a, b, pair, apply_action(table, pair)))
    return out
