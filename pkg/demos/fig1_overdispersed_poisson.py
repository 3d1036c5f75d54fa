"""w_hat against sample size for overdispersed counts.

Counts come from a Poisson-gamma mixture with mean 3.33 and mixing variance
11.11, fitted by a Poisson model with a Gamma(3, 1) prior.  The estimate
settles near w* = 0.684 as n grows.  A plot is drawn if matplotlib is
installed; otherwise the curve is printed.
"""
# %%
import numpy as np

from powercal.experiments import run_fig1

report = run_fig1(seed=0, replicates=5)
w_star = report.summary["w_star"]
print(f"w* = {w_star:.6f}")

# %%
n = np.array(sorted({r["n"] for r in report.records}))
w = np.array([[r["w_hat"] for r in report.records if r["replicate"] == k] for k in range(5)])
for i in range(0, len(n), 10):
    print(f"n={n[i]:5d}  " + "  ".join(f"{v:.3f}" for v in w[:, i]))

# %%
try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for row in w:
        ax.plot(n, row, lw=1)
    ax.axhline(w_star, color="k", ls="--", label="w*")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("w_hat")
    ax.legend()
    fig.tight_layout()
    fig.savefig("fig1.png", dpi=120)
    print("saved fig1.png")
