"""Quickstart: calibrating w for a Poisson model with a gamma prior.

Run with ``python demos/calibrate_quickstart.py``.
"""
# %%
import numpy as np

from powercal import Dataset, GammaPrior, Poisson, fisher_w_hat, fisher_w_population
from powercal.posterior import power_posterior_conjugate

model = Poisson()
prior = GammaPrior(3.0, 1.0)

# %% Counts whose spread matches the Poisson variance give w = 1.
well = Dataset([1, 1, 4])
print("mean", well.mean, "variance", well.variance)
print("w_hat", fisher_w_hat(model, prior, well).w_hat)

# %% Overdispersed counts pull w below 1: the data are trusted less.
rng = np.random.default_rng(0)
lam = rng.gamma(3.33 ** 2 / 11.11, 11.11 / 3.33, size=500)
over = Dataset(rng.poisson(lam))
res = fisher_w_hat(model, prior, over)
print(f"S2/x_bar = {over.variance / over.mean:.2f}, w_hat = {res.w_hat:.4f}")
print("numerator", res.numerator, "denominator", res.denominator)

# %% The population value it estimates.
print("w* =", fisher_w_population(model, prior, 3.33, 3.33 + 11.11).w_hat)

# %% Power posterior with the calibrated w against standard Bayes.
for w in (res.w_hat, 1.0):
    post = power_posterior_conjugate(model, prior, over, w)
    print(f"w={w:.4f}: posterior mean {post.mean:.4f}, sd {np.sqrt(post.var):.4f}")
