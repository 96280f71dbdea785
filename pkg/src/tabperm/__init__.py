"""Permutation-invariance diagnostics for table cell embeddings."""

from .datasets import load_fixture, synthetic_corpus, synthetic_table
from .embed import (CellEmbeddingMatrix, ContextFreeMock, InvariantMock, PositionalMock,
                    RemoteProvider, align_by_identity, embed_cells, make_provider)
from .metrics import auc_slice, cka, cosine_matrix, hsic_linear, spearman
from .permute import (Permutation, PermutationPair, apply_action, build_grid, invert,
                      sample_derangement, sample_fixed_point_perm)
from .refine import (RefinedProvider, RefinerConfig, RefinerParams, alignment_score,
                     extract_smps, refine, train_refiner)
from .serialize import linearize
from .sweep import aggregate, compare_models, platonic_heatmap, retrieval_probe, summarize
from .table import CellId, Table, canonical_cell_order, parse_table, read_table, write_table

__version__ = "0.1.0"
