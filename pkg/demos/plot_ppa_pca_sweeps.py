"""
Unsupervised reduction: PPA and PCA sweeps
==========================================

On the synthetic data the class signal lives inside the top principal
directions.  Removing them with PPA should therefore hurt the probe,
while keeping them with PCA should recover almost all of the accuracy
of the raw 300-dimensional embedding.
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from embreduce import GeneratorConfig, cross_validate, generate, sweep

out_dir = sys.argv[1] if len(sys.argv) > 1 else "."
data = generate(GeneratorConfig(seed=42))
raw = cross_validate(data, "raw").mean_accuracy
print(f"raw embedding accuracy: {raw:.3f}")

###############################################################################
# Removing directions
# -------------------
# Stratified 5-fold CV, the same folds at every grid point.

ppa_d = list(range(0, 31, 2))
ppa = sweep(data, "ppa", [{"d": d} for d in ppa_d])
for d, r in zip(ppa_d, ppa):
    print(f"PPA D={d:2d}  {r.mean_accuracy:.3f} +/- {r.std_accuracy:.3f}")

###############################################################################
# Keeping components
# ------------------

pca_d = [1, 2, 3, 5, 8, 10, 15, 25, 50, 100, 300]
pca = sweep(data, "pca", [{"d": d} for d in pca_d])
for d, r in zip(pca_d, pca):
    print(f"PCA D={d:3d}  {r.mean_accuracy:.3f}")

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
ax1.errorbar(ppa_d, [r.mean_accuracy for r in ppa], [r.std_accuracy for r in ppa], marker="o", capsize=2)
ax1.axhline(raw, ls="--", c="gray", label="raw")
ax1.set_xlabel("removed directions D")
ax1.set_ylabel("CV accuracy")
ax1.legend()
ax2.semilogx(pca_d, [r.mean_accuracy for r in pca], "o-")
ax2.axhline(raw, ls="--", c="gray")
ax2.set_xlabel("principal components D")
fig.tight_layout()
fig.savefig(f"{out_dir}/ppa_pca_sweeps.png", dpi=120)
