# %% [markdown]
# # Corpus-level summary
#
# Sweeps over many tables are reduced to one row per provider: the mean and
# spread of rho_mono, PI_derange and AUC on each axis. The same reports could
# come from ``tabperm sweep`` runs on disk via ``tabperm aggregate``.

# %%
from tabperm import PositionalMock, aggregate, platonic_heatmap, summarize, synthetic_corpus

corpus = synthetic_corpus(8, n_range=(10, 14), m_range=(10, 12), seed=5)
provider = PositionalMock(weight=1.0)
reports = [summarize(platonic_heatmap(t, provider, seed=0)) for t in corpus]

summary = aggregate(reports, {"provider_id": provider.provider_id})
for (name, axis), stat in summary.stats.items():
    print(f"{name + '.' + axis:16s} {stat.mean:.4f} ± {stat.std:.4f}  (n={stat.count})")
