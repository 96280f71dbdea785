# %% [markdown]
# # Pulling cells towards their headers
#
# Every data cell sits on a header-cell-header path: its row header, itself,
# and its column header. The refiner is a small one-hidden-layer map trained
# so each cell lands close to its own two headers and away from headers
# sampled elsewhere in the table.

# %%
from tabperm import (ContextFreeMock, RefinedProvider, RefinerConfig, RefinerParams,
                     alignment_score, embed_cells, extract_smps, load_fixture, platonic_heatmap,
                     refine, summarize, train_refiner)
from tabperm.refine import evaluate_loss

table = load_fixture("grid6")
base = embed_cells(table, ContextFreeMock(dim=16), include_headers=True)
paths = extract_smps(table)
print(len(paths), "paths, base dimension", base.d)

# %%
config = RefinerConfig(epochs=50, seed=0)
init = RefinerParams.initialize(base.d, config)
params, trace = train_refiner(base, paths, config, init)
print("epoch loss:", " ".join(f"{v:.3f}" for v in trace[::10]))
print("held-out loss %.3f -> %.3f" % (evaluate_loss(init, base, paths), evaluate_loss(params, base, paths)))
print("alignment %.3f -> %.3f" % (alignment_score(refine(base, init), paths),
                                  alignment_score(refine(base, params), paths)))

# %% [markdown]
# The trained map wraps any provider. Applied after a layout-blind embedder
# it stays layout-blind, so its heatmap is still all ones.

# %%
hm = platonic_heatmap(table, RefinedProvider(ContextFreeMock(dim=16), params), seed=0)
print("PI_derange after refinement:", summarize(hm).pi_derange)
