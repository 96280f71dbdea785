"""Bundled fixtures and seeded synthetic tables."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .table import Table, make_table, parse_table

FIXTURES = {"rugby": "rugby.csv", "grid6": "grid6.csv"}

_HEADER_WORDS = ("Played", "Won", "Lost", "Score", "Rank", "Year", "Count", "Total", "Goals",
                 "Height", "Weight", "Age", "Price", "Votes", "Share", "Games", "Points",
                 "Seats", "Area", "Stock")
_NAME_WORDS = ("North", "South", "River", "Oak", "Stone", "Iron", "Lake", "Hill", "Bay", "Park",
               "Field", "Bridge", "Mill", "Port", "Cross", "Vale")


def fixture_path(name: str):
    return resources.files("tabperm") / "data" / FIXTURES[name]


def load_fixture(name: str, row_header_column: bool = False) -> Table:
    """``rugby`` (12 x 12 with all columns as data by default) or ``grid6`` (6 x 6)."""
    text = fixture_path(name).read_text(encoding="utf-8")
    return parse_table(text, "csv", row_header_column=row_header_column, name=name)


def synthetic_table(n: int, m: int, seed: int = 0, name: str | None = None) -> Table:
    """Seeded n x m table of small integers under word headers; repeats like "22" are common."""
    rng = np.random.default_rng(seed)
    words = rng.permutation(len(_HEADER_WORDS))
    headers = [f"{_HEADER_WORDS[words[j % len(words)]]}" + (f" {j // len(words) + 1}" if j >= len(words) else "")
               for j in range(m)]
    names = [f"{_NAME_WORDS[rng.integers(len(_NAME_WORDS))]} {_NAME_WORDS[rng.integers(len(_NAME_WORDS))]} {i}"
             for i in range(n)]
    scale = rng.integers(5, 200, size=m)
    cells = [[str(int(rng.integers(0, scale[j]))) for j in range(m)] for _ in range(n)]
    return make_table(cells, headers, names, name=name or f"synthetic_{seed}")


def synthetic_corpus(count: int = 20, n_range=(10, 30), m_range=(10, 15), seed: int = 0) -> list[Table]:
    rng = np.random.default_rng(seed)
    return [synthetic_table(int(rng.integers(n_range[0], n_range[1] + 1)),
                            int(rng.integers(m_range[0], m_range[1] + 1)),
                            seed=int(rng.integers(2**31)), name=f"synthetic_{k:02d}")
            for k in range(count)]
