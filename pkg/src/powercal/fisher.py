"""Learning-rate calibration by matching expected Fisher information gain.

For one observation x the Fisher divergence of the posterior from the prior
is ``delta(x) = E_prior[score(x, theta)^2]``; raising the likelihood to the
power w scales it by w^2.  Matching the expectation of ``w^2 delta`` under
the data distribution with the expectation of ``delta`` under the fitted
model gives

    w^2 = E_{f(.; theta0)}[delta(X)] / E_{f0}[delta(X)]

and the plug-in estimate replaces f0 by the empirical distribution and
theta0 by the MLE.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from . import numerics
from .errors import DegenerateDataError, DomainError, UnsupportedPairError
from .models import (
    TRUNCATION_MASS,
    Dataset,
    ExpFamilyModel,
    GammaPrior,
    GenericNatural,
    NormalKnownVar,
    Poisson,
    Prior,
    prior_inverse_moments,
)

FISHER_CLOSED = "fisher-closed-form"
FISHER_QUADRATURE = "fisher-quadrature"
KL_NUMERIC = "kl-numeric"
METHODS = (FISHER_CLOSED, FISHER_QUADRATURE, KL_NUMERIC)


@dataclass(frozen=True)
class CalibrationResult:
    """A calibrated power with the quantities that produced it.

    For the Fisher methods ``numerator``/``denominator`` are the model-side
    and data-side expected divergences and ``w_hat**2`` is their ratio.  For
    ``kl-numeric`` they hold the two sides of the KL match at the root.
    """

    w_hat: float
    numerator: float
    denominator: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.w_hat > 0 and self.numerator > 0 and self.denominator > 0):
            raise DegenerateDataError(
                f"calibration produced non-positive terms: w={self.w_hat}, "
                f"N={self.numerator}, D={self.denominator}")

    def to_dict(self) -> dict:
        return {
            "w_hat": self.w_hat,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "method": self.method,
            "diagnostics": dict(self.diagnostics),
        }


def _ratio_result(num: float, den: float, method: str, **diagnostics) -> CalibrationResult:
    if not den > 0:
        raise DegenerateDataError(f"zero denominator in the information ratio (D={den})")
    return CalibrationResult(math.sqrt(num / den), num, den, method, diagnostics)


# --------------------------------------------------------------------------
# delta(x) and I_w(x)
# --------------------------------------------------------------------------

def _prior_moments_12(prior: Prior) -> tuple[float, float]:
    return prior.moment(1), prior.moment(2)


def delta(model: ExpFamilyModel, prior: Prior, x: float) -> float:
    """Fisher divergence of the one-observation posterior from the prior.

    Closed forms are used where prior moments give them: Poisson needs
    E[1/theta] and E[1/theta^2]; the known-variance normal needs the first
    two raw moments.  Everything else goes through quadrature.
    """
    model.check_x(x)
    if isinstance(model, Poisson):
        a, b = prior_inverse_moments(prior)
        return x * x * a - 2.0 * x * b + 1.0
    if isinstance(model, NormalKnownVar):
        m1, m2 = _prior_moments_12(prior)
        return (x * x - 2.0 * x * m1 + m2) / model.variance ** 2
    return delta_quadrature(model, prior, x)


def delta_quadrature(model: ExpFamilyModel, prior: Prior, x: float,
                     spec: numerics.QuadratureSpec = numerics.DEFAULT_QUADRATURE) -> float:
    """``delta(x)`` by direct quadrature of score^2 against the prior."""
    model.check_x(x)
    lo = max(prior.support[0], model.domain[0])
    hi = min(prior.support[1], model.domain[1])
    if not lo < hi:
        raise DomainError("prior support does not overlap the model's parameter domain")

    def integrand(theta):
        if not lo < theta < hi:
            return 0.0
        p = float(prior.pdf(theta))
        if p == 0.0:
            return 0.0
        s = float(model.score(x, theta))
        return s * s * p

    return numerics.integrate(integrand, lo, hi, spec, breakpoints=prior.breakpoints())


def i_w(w: float, model: ExpFamilyModel, prior: Prior, x: float) -> float:
    """Expected information gain under the power likelihood, ``w^2 delta(x)``."""
    if not w > 0:
        raise DomainError(f"w must be positive, got {w}")
    return w * w * delta(model, prior, x)


# --------------------------------------------------------------------------
# population w
# --------------------------------------------------------------------------

def _spread_term(model: ExpFamilyModel, prior: Prior, center: float) -> float:
    """V = E_prior[(center - b'(theta))^2]."""
    if isinstance(model, (Poisson, NormalKnownVar)):
        m1, m2 = _prior_moments_12(prior)
        return center * center - 2.0 * center * m1 + m2

    def g(theta):
        d = center - float(model.mean_map(theta))
        return d * d

    return prior.expect(g)


def fisher_w_population(model: ExpFamilyModel, prior: Prior, mu0: float, var0: float) -> CalibrationResult:
    """The matched power for a data distribution with mean ``mu0`` and
    variance ``var0`` (of the sufficient statistic).

    theta0 solves ``b'(theta0) = mu0``.
    """
    if not var0 >= 0:
        raise DomainError(f"variance must be non-negative, got {var0}")
    if isinstance(model, Poisson):
        if not mu0 > 0:
            raise DomainError(f"Poisson mean must be positive, got {mu0}")
        a, b = prior_inverse_moments(prior)
        num = (mu0 * mu0 + mu0) * a - 2.0 * b * mu0 + 1.0
        den = a * (mu0 * mu0 + var0) - 2.0 * b * mu0 + 1.0
        return _ratio_result(num, den, FISHER_CLOSED, a=a, b=b, mu0=mu0, var0=var0, theta0=mu0)
    if isinstance(model, NormalKnownVar):
        v = model.variance
        spread = _spread_term(model, prior, mu0)
        return _ratio_result((v + spread) / v ** 2, (var0 + spread) / v ** 2, FISHER_CLOSED,
                             mu0=mu0, var0=var0, theta0=mu0, V=spread)
    if isinstance(model, GenericNatural):
        theta0 = model.solve_mean(mu0)
        spread = _spread_term(model, prior, mu0)
        return _ratio_result(float(model.var_map(theta0)) + spread, var0 + spread, FISHER_CLOSED,
                             mu0=mu0, var0=var0, theta0=theta0, V=spread)
    raise UnsupportedPairError(f"no population formula for {type(model).__name__}")


# --------------------------------------------------------------------------
# plug-in estimate
# --------------------------------------------------------------------------

def fisher_w_hat(model: ExpFamilyModel, prior: Prior, data: Dataset, method: str = "auto") -> CalibrationResult:
    """Plug-in estimate of the matched power from observed data.

    ``method`` is ``"auto"`` (closed form when available), ``"closed"`` or
    ``"quadrature"``; the quadrature path evaluates both expectations of
    ``delta`` directly and serves as the independent check on the closed
    forms.
    """
    if method not in ("auto", "closed", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    model.check_x(data.values)
    if method == "quadrature":
        return _w_hat_quadrature(model, prior, data)

    if isinstance(model, Poisson):
        xbar, s2 = data.mean, data.variance
        theta_hat = model.mle(data)
        a, b = prior_inverse_moments(prior)
        num = a * (xbar * xbar + xbar) - 2.0 * b * xbar + 1.0
        den = a * (xbar * xbar + s2) - 2.0 * b * xbar + 1.0
        return _ratio_result(num, den, FISHER_CLOSED, a=a, b=b, x_bar=xbar, S2=s2,
                             theta_hat=theta_hat, n=data.n)
    if isinstance(model, NormalKnownVar):
        v = model.variance
        xbar, s2 = data.mean, data.variance
        spread = _spread_term(model, prior, xbar)
        return _ratio_result((v + spread) / v ** 2, (s2 + spread) / v ** 2, FISHER_CLOSED,
                             x_bar=xbar, S2=s2, theta_hat=xbar, V_hat=spread, n=data.n)
    if isinstance(model, GenericNatural):
        tdata = Dataset(model.stat(data.values))
        theta_hat = model.mle(data)
        spread = _spread_term(model, prior, tdata.mean)
        return _ratio_result(float(model.var_map(theta_hat)) + spread, tdata.variance + spread,
                             FISHER_CLOSED, x_bar=tdata.mean, S2=tdata.variance,
                             theta_hat=theta_hat, V_hat=spread, n=data.n)
    if method == "closed":
        raise UnsupportedPairError(f"no closed form for {type(model).__name__}")
    return _w_hat_quadrature(model, prior, data)


def _w_hat_quadrature(model: ExpFamilyModel, prior: Prior, data: Dataset) -> CalibrationResult:
    theta_hat = model.mle(data)

    @lru_cache(maxsize=None)
    def dq(x: float) -> float:
        return delta_quadrature(model, prior, x)

    den = math.fsum(dq(float(x)) for x in data.values) / data.n
    num = expected_under_model(model, theta_hat, dq)
    return _ratio_result(num, den, FISHER_QUADRATURE, theta_hat=theta_hat, x_bar=data.mean,
                         S2=data.variance, n=data.n)


def expected_under_model(model: ExpFamilyModel, theta: float, g) -> float:
    """E[g(X)] for X ~ f(.; theta).

    Count models sum over x = 0, 1, ... until the accumulated mass exceeds
    ``1 - 1e-12``; continuous models integrate with cuts at the mean and a
    few standard deviations either side.
    """
    if model.discrete:
        terms, mass, x = [], 0.0, int(max(model.x_support[0], 0.0))
        while mass < TRUNCATION_MASS:
            p = float(model.pdf(float(x), theta))
            mass += p
            terms.append(p * g(float(x)))
            x += 1
            if x > 10_000_000:
                raise numerics.ConvergenceError("count support sum did not reach its mass target")
        return math.fsum(terms)
    center = float(model.mean_map(theta))
    sd = math.sqrt(float(model.var_map(theta)))
    cuts = [center + k * sd for k in (-8, -4, -1, 0, 1, 4, 8)]
    lo, hi = model.x_support
    return numerics.integrate(lambda x: g(x) * float(model.pdf(x, theta)), lo, hi,
                              breakpoints=cuts)


def prior_predictive_pmf(prior: Prior, x: int) -> float:
    """Prior predictive mass of a Poisson count under a gamma prior (negative binomial)."""
    if not isinstance(prior, GammaPrior):
        raise UnsupportedPairError("closed prior predictive needs a gamma prior")
    return float(stats.nbinom.pmf(x, prior.shape, prior.rate / (1.0 + prior.rate)))


def expected_delta_prior_predictive(prior: Prior) -> float:
    """Sum over counts of ``delta(x) * pbar(x)`` for the Poisson model.

    For a Gamma(shape, rate) prior this is ``E[x^2] a - 2 E[x] b + 1`` under
    the negative binomial predictive.
    """
    model = Poisson()
    terms, mass, x = [], 0.0, 0
    while mass < TRUNCATION_MASS:
        p = prior_predictive_pmf(prior, x)
        mass += p
        terms.append(p * delta(model, prior, float(x)))
        x += 1
    return math.fsum(terms)


def posterior_delta(model: ExpFamilyModel, prior: Prior, x: float) -> float:
    """Fisher divergence weighted by the one-observation posterior,
    ``E_{p(theta|x)}[score(x, theta)^2]``, by quadrature.

    Averaged over the prior predictive this recovers the prior-expected
    Fisher information; ``delta`` (prior-weighted) does not.
    """
    model.check_x(x)
    lo = max(prior.support[0], model.domain[0])
    hi = min(prior.support[1], model.domain[1])

    def joint(theta):
        p = float(prior.pdf(theta))
        return float(model.pdf(x, theta)) * p if p > 0.0 else 0.0

    def weighted(theta):
        j = joint(theta)
        if j == 0.0:
            return 0.0
        s = float(model.score(x, theta))
        return s * s * j

    cuts = prior.breakpoints()
    evidence = numerics.integrate(joint, lo, hi, breakpoints=cuts)
    return numerics.integrate(weighted, lo, hi, breakpoints=cuts) / evidence


def expected_posterior_delta_prior_predictive(prior: Prior) -> float:
    """Sum over counts of ``posterior_delta(x) * pbar(x)`` for the Poisson model."""
    model = Poisson()
    terms, mass, x = [], 0.0, 0
    while mass < TRUNCATION_MASS:
        p = prior_predictive_pmf(prior, x)
        mass += p
        terms.append(p * posterior_delta(model, prior, float(x)))
        x += 1
    return math.fsum(terms)


def w_hat_path(model: ExpFamilyModel, prior: Prior, values, n_grid) -> np.ndarray:
    """Plug-in estimates on nested prefixes ``values[:n]`` for each n."""
    values = np.asarray(values, dtype=float)
    return np.array([fisher_w_hat(model, prior, Dataset(values[:n])).w_hat for n in n_grid])
