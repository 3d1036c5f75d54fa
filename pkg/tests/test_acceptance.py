"""End-to-end acceptance checks, one test per criterion.

Each test records a pass/fail line that the conftest hook prints in the
terminal summary, then asserts.  Thresholds are exactly as stated; a failing
criterion is left failing.
"""
import math
import time

import numpy as np
import pytest

from powercal.experiments import (
    FIG1_MIX_MEAN,
    FIG1_MIX_VAR,
    FIG1_PRIOR,
    PoissonGammaMixture,
    consistency_study,
    run_fig1,
    run_fig2,
)
from powercal.fisher import (
    expected_delta_prior_predictive,
    expected_posterior_delta_prior_predictive,
    fisher_w_hat,
    i_w,
)
from powercal.kl import KlMatchProblem, kl_match_w, kl_residual
from powercal.models import Dataset, GammaPrior, NormalKnownVar, NormalPrior, Poisson
from powercal.numerics import central_difference
from powercal.posterior import power_posterior_grid

pytestmark = pytest.mark.acceptance

SEEDS = range(100)


def test_overdispersed_poisson_band(record_acceptance):
    start = time.perf_counter()
    ws = []
    for s in SEEDS:
        gen = PoissonGammaMixture(FIG1_MIX_MEAN, FIG1_MIX_VAR, s)
        ws.append(run_fig1(s, n_grid=[1000], prior=FIG1_PRIOR, generator=gen).records[0]["w_hat"])
    elapsed = time.perf_counter() - start
    ws = np.array(ws)
    frac = float(np.mean((ws >= 0.62) & (ws <= 0.75)))
    passed = frac >= 0.9 and bool(np.all(ws < 1)) and elapsed < 30
    record_acceptance("1-overdispersed-band", passed,
                      f"{frac:.0%} of seeds in [0.62, 0.75], range [{ws.min():.4f}, {ws.max():.4f}], "
                      f"{elapsed:.1f}s")
    assert passed


def test_well_specified_consistency(record_acceptance):
    # Seed fixed in advance.  The bound is fitted at n=100 from a single median
    # and leaves little room: across other seeds it holds only about a third
    # of the time, so this check is fragile by construction.
    start = time.perf_counter()
    med = consistency_study(seed=2024, n_values=(100, 400, 1600), replicates=200, theta=3.0,
                            prior=GammaPrior(3.0, 1.0))
    elapsed = time.perf_counter() - start
    c = med[100] * math.sqrt(100)
    decreasing = med[100] > med[400] > med[1600]
    bounded = all(med[n] <= c / math.sqrt(n) for n in (400, 1600))
    passed = decreasing and bounded and elapsed < 60
    detail = ", ".join(f"n={n}: {m:.5f} (bound {c / math.sqrt(n):.5f})" for n, m in med.items())
    record_acceptance("2-consistency", passed, f"{detail}; {elapsed:.1f}s")
    assert passed


def test_prior_predictive_identity(record_acceptance):
    prior = GammaPrior(3.0, 1.0)
    value = expected_delta_prior_predictive(prior)
    target = 0.5
    passed = abs(value - target) < 1e-6
    alt = expected_posterior_delta_prior_predictive(prior)
    record_acceptance(
        "3-prior-predictive-identity", passed,
        f"sum Delta(x) pbar(x) = {value:.12g} vs {target}; "
        f"posterior-weighted divergence gives {alt:.12g}")
    assert passed, f"prior-weighted sum is {value!r}, not {target}"


def test_closed_form_matches_quadrature(record_acceptance):
    rng = np.random.default_rng(20240)
    worst = 0.0
    for i in range(50):
        n = int(rng.integers(5, 60))
        if i % 2 == 0:
            model = Poisson()
            prior = GammaPrior(float(rng.uniform(2.5, 8.0)), float(rng.uniform(0.3, 3.0)))
            lam = rng.gamma(2.0, float(rng.uniform(0.5, 3.0)), n)
            data = Dataset(rng.poisson(lam) + (np.arange(n) == 0))
        else:
            model = NormalKnownVar(float(rng.uniform(0.3, 3.0)))
            prior = NormalPrior(float(rng.normal(0, 2)), float(rng.uniform(0.01, 2.0)))
            data = Dataset(rng.normal(rng.normal(0, 2), rng.uniform(0.3, 3.0), n))
        closed = fisher_w_hat(model, prior, data, method="closed").w_hat
        quad = fisher_w_hat(model, prior, data, method="quadrature").w_hat
        worst = max(worst, abs(quad / closed - 1))
    passed = worst < 1e-5
    record_acceptance("4-oracle-equivalence", passed, f"max relative difference {worst:.3g} over 50 cases")
    assert passed


def test_fisher_posterior_closer(record_acceptance):
    lines = ["scenario        seed  w_fisher  w_kl      d_fisher  d_kl      closer"]
    wins = {}
    for sc in ("overdispersed", "underdispersed"):
        wins[sc] = 0
        for s in SEEDS:
            r = run_fig2(s, sc).records[0]
            closer = r["d_fisher"] <= r["d_kl"]
            wins[sc] += closer
            lines.append(f"{sc:<15} {s:>4}  {r['w_fisher']:.6f}  {r['w_kl']:.6f}  "
                         f"{r['d_fisher']:.6f}  {r['d_kl']:.6f}  {'fisher' if closer else 'kl'}")
    table = "\n".join(lines)
    passed = all(k > len(SEEDS) / 2 for k in wins.values())
    record_acceptance("5-fisher-closer", passed,
                      ", ".join(f"{sc}: Fisher closer in {k}/{len(SEEDS)} seeds" for sc, k in wins.items()))
    if not passed:
        print(table)
    assert passed, "Fisher-calibrated posterior not closer in a majority of seeds:\n" + table


def test_property_suite(record_acceptance):
    failures = []
    # score against finite differences of the log density
    for model, xs, thetas in [(Poisson(), [0, 3, 11], [0.4, 2.0, 9.0]),
                              (NormalKnownVar(2.0), [-1.0, 0.5, 4.0], [-2.0, 0.0, 3.0])]:
        for x in xs:
            for t in thetas:
                fd = central_difference(lambda u: float(model.logpdf(x, u)), t, 1e-5)
                if abs(float(model.score(x, t)) - fd) > 1e-6:
                    failures.append(f"score {type(model).__name__} x={x} theta={t}")
    # posterior normalisation
    for model, prior, data in [(Poisson(), GammaPrior(3, 1), Dataset([2, 0, 7])),
                               (NormalKnownVar(1), NormalPrior(0, 0.01), Dataset([1.0, -3.0]))]:
        for w in (0.1, 1.0, 3.0):
            z = power_posterior_grid(model, prior, data, w).integral()
            if abs(z - 1) > 1e-6:
                failures.append(f"normalisation {z}")
    # I_w scales exactly as w^2
    for w in (0.25, 0.5, 2.0):
        base = i_w(1.0, Poisson(), GammaPrior(3, 1), 4)
        if i_w(w, Poisson(), GammaPrior(3, 1), 4) != w * w * base:
            failures.append(f"I_w scaling w={w}")
    # w_hat decreasing in S^2 at fixed mean
    spreads = [fisher_w_hat(Poisson(), GammaPrior(3, 1), Dataset([5 - k, 5 + k])).w_hat for k in range(6)]
    if not all(a > b for a, b in zip(spreads, spreads[1:])):
        failures.append("monotone in S2")
    # determinism
    if run_fig1(5).to_json() != run_fig1(5).to_json() or \
            run_fig2(5, "underdispersed").to_json() != run_fig2(5, "underdispersed").to_json():
        failures.append("determinism")
    # KL residual at the returned w
    data = Dataset(np.random.default_rng(1).normal(0, math.sqrt(5), 50))
    problem = KlMatchProblem(NormalKnownVar(1), NormalPrior(0, 0.01), data)
    w = kl_match_w(problem).w_hat
    res = kl_residual(problem)[0](w)
    if abs(res) > 1e-8:
        failures.append(f"KL residual {res}")
    passed = not failures
    record_acceptance("6-property-suite", passed, "all properties hold" if passed else "; ".join(failures))
    assert passed
