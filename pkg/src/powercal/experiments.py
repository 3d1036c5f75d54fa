"""Seeded data generators and the two reproduction pipelines.

* ``run_fig1``: plug-in w against sample size for overdispersed counts
  (Poisson-gamma mixture with mean 3.33 and mixing variance 11.11) fitted by a
  Poisson model with a Gamma(3, 1) prior.
* ``run_fig2``: normal model with unit variance and a Normal(0, precision
  0.01) prior fitted to 50 observations of precision 0.2 or 4; compares the
  Fisher-calibrated and KL-calibrated power posteriors with the posterior
  under the correct variance.

All randomness flows from ``numpy.random.PCG64`` seeded explicitly, so a
report is a pure function of (config, seed).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import io
from .fisher import fisher_w_hat, fisher_w_population
from .kl import KlMatchProblem, kl_match_w
from .models import Dataset, GammaPrior, NormalKnownVar, NormalPrior, Poisson, Prior
from .posterior import (
    DEFAULT_POINTS,
    DensityGrid,
    density_distance,
    power_posterior_conjugate,
    power_posterior_grid,
)
from .errors import DomainError

RNG_NAME = "numpy.random.PCG64"

FIG1_MIX_MEAN = 3.33
FIG1_MIX_VAR = 11.11
FIG1_PRIOR = GammaPrior(3.0, 1.0)
FIG1_N_GRID = tuple(range(10, 1001, 10))

FIG2_N = 50
FIG2_MODEL_VARIANCE = 1.0
FIG2_PRIOR = NormalPrior(0.0, 0.01)
FIG2_DATA_MEAN = 0.0
SCENARIOS = {"overdispersed": 0.2, "underdispersed": 4.0}


def rng_info() -> dict:
    return {"bit_generator": RNG_NAME, "numpy": np.__version__}


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PoissonGammaMixture:
    """x | phi ~ Poisson(phi), phi ~ Gamma with the given mean and variance."""

    mix_mean: float
    mix_var: float
    seed: int = 0
    kind = "poisson-gamma-mixture"

    def __post_init__(self):
        if not (self.mix_mean > 0 and self.mix_var > 0):
            raise DomainError("mixture needs positive mean and variance")

    @property
    def shape(self) -> float:
        return self.mix_mean ** 2 / self.mix_var

    @property
    def rate(self) -> float:
        return self.mix_mean / self.mix_var

    @property
    def mean(self) -> float:
        return self.mix_mean

    @property
    def variance(self) -> float:
        return self.mix_mean + self.mix_var

    def draw(self, rng, n):
        phi = rng.gamma(self.shape, 1.0 / self.rate, size=n)
        return rng.poisson(phi).astype(float)


@dataclass(frozen=True)
class NormalFixed:
    mean: float
    precision: float
    seed: int = 0
    kind = "normal"

    def __post_init__(self):
        if not self.precision > 0:
            raise DomainError("normal generator needs precision > 0")

    @property
    def variance(self) -> float:
        return 1.0 / self.precision

    def draw(self, rng, n):
        return rng.normal(self.mean, math.sqrt(self.variance), size=n)


@dataclass(frozen=True)
class PoissonExact:
    theta: float
    seed: int = 0
    kind = "poisson"

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError("Poisson generator needs theta > 0")

    @property
    def mean(self) -> float:
        return self.theta

    @property
    def variance(self) -> float:
        return self.theta

    def draw(self, rng, n):
        return rng.poisson(self.theta, size=n).astype(float)


def generator_config(spec) -> dict:
    return {"kind": spec.kind, **asdict(spec)}


def generate(spec, n: int) -> Dataset:
    """Draw ``n`` observations, deterministically from ``spec.seed``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return Dataset(spec.draw(make_rng(spec.seed), n))


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

@dataclass
class ExperimentReport:
    name: str
    seed: int
    config: dict
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    rng: dict = field(default_factory=rng_info)
    # tabulated posteriors, written as CSV rather than JSON
    grids: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {"name": self.name, "seed": self.seed, "config": self.config,
                "records": self.records, "summary": self.summary, "rng": self.rng}

    def to_json(self) -> str:
        return io.dumps(self.to_dict())


# --------------------------------------------------------------------------
# w_hat against sample size
# --------------------------------------------------------------------------

def run_fig1(seed: int, n_grid=FIG1_N_GRID, prior: Prior = FIG1_PRIOR, generator=None,
             replicates: int = 1) -> ExperimentReport:
    """Plug-in w on nested prefixes of one long sample, per replicate.

    Replicate streams are spawned from ``seed`` by ``SeedSequence`` when
    ``replicates > 1``; a single replicate uses ``seed`` directly.
    """
    n_grid = [int(n) for n in n_grid]
    if generator is None:
        generator = PoissonGammaMixture(FIG1_MIX_MEAN, FIG1_MIX_VAR, seed)
    model = Poisson()
    seeds = [seed] if replicates == 1 else np.random.SeedSequence(seed).spawn(replicates)
    records = []
    for r, s in enumerate(seeds):
        values = generator.draw(make_rng(s), max(n_grid))
        for n in n_grid:
            res = fisher_w_hat(model, prior, Dataset(values[:n]))
            records.append({"replicate": r, "n": n, "w_hat": res.w_hat,
                            "x_bar": res.diagnostics["x_bar"], "S2": res.diagnostics["S2"]})
    summary = {}
    if hasattr(generator, "variance") and hasattr(generator, "mean"):
        summary["w_star"] = fisher_w_population(model, prior, generator.mean, generator.variance).w_hat
    config = {"generator": generator_config(generator), "prior": io.prior_spec_string(prior),
              "model": "poisson", "n_grid": n_grid, "replicates": replicates}
    return ExperimentReport("fig1", seed, config, records, summary)


def consistency_study(seed: int, n_values=(100, 400, 1600), replicates: int = 200,
                      theta: float = 3.0, prior: Prior = FIG1_PRIOR) -> dict:
    """Median |1 - w_hat^2| over replicates of well-specified Poisson data.

    Each replicate draws one stream of length ``max(n_values)`` and uses
    nested prefixes.
    """
    model = Poisson()
    gen = PoissonExact(theta)
    devs = {n: [] for n in n_values}
    for s in np.random.SeedSequence(seed).spawn(replicates):
        values = gen.draw(make_rng(s), max(n_values))
        for n in n_values:
            w = fisher_w_hat(model, prior, Dataset(values[:n])).w_hat
            devs[n].append(abs(1.0 - w * w))
    return {n: float(np.median(d)) for n, d in devs.items()}


# --------------------------------------------------------------------------
# calibrated normal posteriors
# --------------------------------------------------------------------------

def _common_grid(posteriors, points, width=8.0):
    lo = min(p.mean - width * math.sqrt(p.var) for p in posteriors)
    hi = max(p.mean + width * math.sqrt(p.var) for p in posteriors)
    return np.linspace(lo, hi, points)


def run_fig2(seed: int, scenario: str, n: int = FIG2_N, prior: NormalPrior = FIG2_PRIOR,
             model_variance: float = FIG2_MODEL_VARIANCE, data_mean: float = FIG2_DATA_MEAN,
             points: int = DEFAULT_POINTS) -> ExperimentReport:
    """Fisher-w, KL-w and correct-model posteriors for one normal scenario.

    The calibrated powers come from single-observation matching and are then
    applied to the full n-observation likelihood.
    """
    if scenario not in SCENARIOS:
        raise DomainError(f"unknown scenario {scenario!r}; expected one of {sorted(SCENARIOS)}")
    tau = SCENARIOS[scenario]
    gen = NormalFixed(data_mean, tau, seed)
    data = generate(gen, n)
    model = NormalKnownVar(model_variance)
    correct_model = NormalKnownVar(1.0 / tau)

    fisher = fisher_w_hat(model, prior, data)
    kl = kl_match_w(KlMatchProblem(model, prior, data))
    posts = {
        "fisher": (model, fisher.w_hat),
        "kl": (model, kl.w_hat),
        "correct": (correct_model, 1.0),
    }
    conj = {k: power_posterior_conjugate(m, prior, data, w) for k, (m, w) in posts.items()}
    grid = _common_grid(conj.values(), points)
    grids: dict[str, DensityGrid] = {
        k: power_posterior_grid(m, prior, data, w, grid=grid) for k, (m, w) in posts.items()
    }
    d_fisher = density_distance(grids["fisher"], grids["correct"])
    d_kl = density_distance(grids["kl"], grids["correct"])
    record = {
        "scenario": scenario,
        "data_precision": tau,
        "x_bar": data.mean,
        "S2": data.variance,
        "w_fisher": fisher.w_hat,
        "w_kl": kl.w_hat,
        "kl_residual": kl.diagnostics["residual"],
        "d_fisher": d_fisher,
        "d_kl": d_kl,
    }
    for k, post in conj.items():
        record[f"{k}_mean"] = post.loc
        record[f"{k}_precision"] = post.precision
    config = {"generator": generator_config(gen), "n": n, "model": io.model_spec_string(model),
              "prior": io.prior_spec_string(prior), "points": points}
    summary = {"fisher_closer": d_fisher <= d_kl}
    return ExperimentReport("fig2", seed, config, [record], summary, grids=grids)
