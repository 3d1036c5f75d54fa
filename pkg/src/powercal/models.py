"""Sampling models, priors and datasets.

Models expose exactly what the calibration formulas consume: the log
density, the score, the mean and variance of the sufficient statistic
(``b'`` and ``b''`` in natural form) and the MLE.  Priors expose densities,
sampling and raw moments, including the inverse moments used by the Poisson
closed forms.

All objects are immutable once built.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special, stats

from . import numerics
from .errors import CalibrationDomainError, DegenerateDataError, DomainError, MomentError

# Sums over a count support stop once the accumulated mass passes this.
TRUNCATION_MASS = 1.0 - 1e-12


# --------------------------------------------------------------------------
# Data
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations with cached n, mean and variance (1/n convention)."""

    values: np.ndarray
    n: int = field(init=False)
    mean: float = field(init=False)
    variance: float = field(init=False)
    total: float = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size < 1:
            raise DegenerateDataError("a dataset needs at least one observation")
        if not np.all(np.isfinite(values)):
            raise DomainError("observations must be finite")
        values.setflags(write=False)
        n = int(values.size)
        total = math.fsum(values)
        mean = total / n
        variance = math.fsum((values - mean) ** 2) / n
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "total", total)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)

    def __len__(self):
        return self.n

    def map(self, fn: Callable[[float], float]) -> "Dataset":
        """Dataset of ``fn(x)`` for each observation."""
        return Dataset(np.array([fn(float(x)) for x in self.values]))

    def prefix(self, n: int) -> "Dataset":
        return Dataset(self.values[:n])


# --------------------------------------------------------------------------
# Priors
# --------------------------------------------------------------------------

class Prior:
    """Proper prior on a scalar parameter."""

    #: open interval carrying the prior mass
    support: tuple[float, float] = (-math.inf, math.inf)

    def logpdf(self, theta):
        raise NotImplementedError

    def pdf(self, theta):
        return np.exp(self.logpdf(theta))

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def moment(self, k: int) -> float:
        """Raw moment E[theta^k]; raises MomentError when it diverges."""
        raise NotImplementedError

    def bulk(self) -> tuple[float, float]:
        """A (center, scale) pair locating most of the mass."""
        raise NotImplementedError

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def var(self) -> float:
        return self.moment(2) - self.moment(1) ** 2

    def breakpoints(self, width: float = 8.0) -> list[float]:
        center, scale = self.bulk()
        pts = [center + k * scale for k in (-width, -2.0, 0.0, 2.0, width)]
        lo, hi = self.support
        return [p for p in pts if lo < p < hi]

    def expect(self, g: Callable[[float], float],
               spec: numerics.QuadratureSpec = numerics.DEFAULT_QUADRATURE) -> float:
        """E[g(theta)] under the prior, by quadrature."""
        lo, hi = self.support

        def integrand(t):
            p = float(self.pdf(t))
            # far tails: g may overflow where the density is already zero
            return g(t) * p if p > 0.0 else 0.0

        return numerics.integrate(integrand, lo, hi, spec, breakpoints=self.breakpoints())


@dataclass(frozen=True)
class GammaPrior(Prior):
    """Gamma(shape, rate) on theta > 0."""

    shape: float
    rate: float
    support = (0.0, math.inf)

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise DomainError(f"gamma prior needs shape>0 and rate>0, got {self.shape}, {self.rate}")

    def logpdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.shape * math.log(self.rate) - special.gammaln(self.shape)
                   + (self.shape - 1.0) * np.log(theta) - self.rate * theta)
        return np.where(theta > 0, out, -np.inf)

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size=size)

    def moment(self, k: int) -> float:
        if self.shape + k <= 0:
            raise MomentError(
                f"E[theta^{k}] does not exist for Gamma(shape={self.shape}, rate={self.rate}): "
                f"requires shape > {-k}"
            )
        return math.exp(special.gammaln(self.shape + k) - special.gammaln(self.shape)) / self.rate ** k

    def bulk(self):
        return self.shape / self.rate, math.sqrt(self.shape) / self.rate

    def breakpoints(self, width: float = 8.0):
        center, scale = self.bulk()
        # extra cuts near the origin keep small-shape densities resolved
        pts = [center / 8.0, center / 2.0, center, center + 2 * scale, center + width * scale]
        return sorted(set(pts))


@dataclass(frozen=True)
class NormalPrior(Prior):
    """Normal(mean, precision) on the real line."""

    loc: float
    precision: float

    def __post_init__(self):
        if not self.precision > 0:
            raise DomainError(f"normal prior needs precision>0, got {self.precision}")

    @property
    def sd(self) -> float:
        return 1.0 / math.sqrt(self.precision)

    def logpdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        return 0.5 * math.log(self.precision / (2 * math.pi)) - 0.5 * self.precision * (theta - self.loc) ** 2

    def sample(self, rng, size=None):
        return rng.normal(self.loc, self.sd, size=size)

    def moment(self, k: int) -> float:
        if k < 0:
            raise MomentError(f"E[theta^{k}] does not exist for a normal prior")
        # E[(m + s Z)^k] by the binomial expansion over even Gaussian moments
        s = self.sd
        return math.fsum(
            math.comb(k, j) * self.loc ** (k - j) * s ** j * _odd_double_factorial(j - 1)
            for j in range(0, k + 1, 2)
        )

    def bulk(self):
        return self.loc, self.sd


def _odd_double_factorial(m: int) -> int:
    # (m)!! for odd m, with (-1)!! = 1
    return math.prod(range(m, 0, -2)) if m > 0 else 1


@dataclass(frozen=True, eq=False)
class TabulatedPrior(Prior):
    """Piecewise-linear density through ``(grid, values)``, zero outside.

    Values are rescaled so the trapezoidal mass is exactly one.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        if grid.size < 2 or grid.shape != values.shape:
            raise DomainError("tabulated prior needs matching grid/values of length >= 2")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("tabulated prior grid must be strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise DomainError("tabulated prior values must be finite and non-negative")
        mass = np.trapezoid(values, grid)
        if not mass > 0:
            raise DomainError("tabulated prior has zero mass")
        values = values / mass
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def support(self):
        return float(self.grid[0]), float(self.grid[-1])

    def pdf(self, theta):
        return np.interp(theta, self.grid, self.values, left=0.0, right=0.0)

    def logpdf(self, theta):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(theta))

    def _cdf_table(self):
        seg = 0.5 * (self.values[1:] + self.values[:-1]) * np.diff(self.grid)
        return np.concatenate([[0.0], np.cumsum(seg)])

    def sample(self, rng, size=None):
        # inverse CDF of the piecewise-linear density, solved per segment
        cdf = self._cdf_table()
        u = rng.uniform(0.0, cdf[-1], size=size)
        idx = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, self.grid.size - 2)
        x0, h = self.grid[idx], np.diff(self.grid)[idx]
        p0, p1 = self.values[idx], self.values[idx + 1]
        slope = (p1 - p0) / h
        r = u - cdf[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            quad_step = (-p0 + np.sqrt(p0 * p0 + 2.0 * slope * r)) / slope
            lin_step = r / p0
        step = np.where(np.abs(slope) > 1e-300, quad_step, lin_step)
        return x0 + np.clip(np.nan_to_num(step), 0.0, h)

    def moment(self, k: int) -> float:
        g, p = self.grid, self.values
        if k < 0 and g[0] <= 0.0:
            raise MomentError(f"E[theta^{k}] needs support bounded away from zero")
        x0, x1 = g[:-1], g[1:]
        slope = np.diff(p) / np.diff(g)
        c0 = p[:-1] - slope * x0  # density = c0 + slope * theta on each segment

        def antideriv(power, x):
            # integral of x^power
            if power == -1:
                return np.log(x)
            return x ** (power + 1) / (power + 1)

        parts = c0 * (antideriv(k, x1) - antideriv(k, x0)) + slope * (
            antideriv(k + 1, x1) - antideriv(k + 1, x0))
        return math.fsum(parts)

    def bulk(self):
        m = self.moment(1)
        return m, math.sqrt(max(self.moment(2) - m * m, 1e-300))

    def breakpoints(self, width: float = 8.0):
        # every node is a kink of the interpolant
        return list(self.grid[1:-1])


def prior_inverse_moments(prior: Prior) -> tuple[float, float]:
    """``(a, b) = (E[theta^-2], E[theta^-1])`` for a prior on theta > 0."""
    if prior.support[0] < 0:
        raise DomainError("inverse moments need a prior supported on theta > 0")
    return prior.moment(-2), prior.moment(-1)


# --------------------------------------------------------------------------
# Sampling models
# --------------------------------------------------------------------------

class ExpFamilyModel:
    """One-parameter exponential family ``c(x) exp{theta t(x) - b(theta)}``.

    Subclasses may use a non-natural parameter (Poisson uses the mean); the
    score is always taken with respect to the parameter the prior is on.
    """

    name = "model"
    discrete = False
    #: open interval of valid parameter values
    domain: tuple[float, float] = (-math.inf, math.inf)
    #: closed range of valid observations
    x_support: tuple[float, float] = (-math.inf, math.inf)

    def check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        lo, hi = self.domain
        if not np.all((theta > lo) & (theta < hi)):
            raise DomainError(f"{self.name}: parameter outside domain ({lo}, {hi}): {theta}")
        return theta

    def check_x(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.x_support
        ok = (x >= lo) & (x <= hi)
        if self.discrete:
            ok &= x == np.floor(x)
        if not np.all(ok):
            raise DomainError(f"{self.name}: observation outside support: {x}")
        return x

    def stat(self, x):
        """Sufficient statistic t(x)."""
        return x

    def logpdf(self, x, theta):
        raise NotImplementedError

    def pdf(self, x, theta):
        return np.exp(self.logpdf(x, theta))

    def score(self, x, theta):
        raise NotImplementedError

    def loglik(self, data: Dataset, theta):
        """Summed log likelihood, vectorised over ``theta``."""
        theta = np.asarray(theta, dtype=float)
        flat = [math.fsum(self.logpdf(data.values, th)) for th in theta.ravel()]
        return np.array(flat).reshape(theta.shape)

    def mean_map(self, theta):
        """E[t(X)] under f(.; theta); b'(theta) in natural form."""
        raise NotImplementedError

    def var_map(self, theta):
        """Var[t(X)] under f(.; theta); b''(theta) in natural form."""
        raise NotImplementedError

    def mle(self, data: Dataset) -> float:
        raise NotImplementedError

    def spec_string(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Poisson(ExpFamilyModel):
    """Poisson(theta) parameterised by its mean."""

    name = "poisson"
    discrete = True
    domain = (0.0, math.inf)
    x_support = (0.0, math.inf)

    def logpdf(self, x, theta):
        theta = self.check_theta(theta)
        x = self.check_x(x)
        return special.xlogy(x, theta) - theta - special.gammaln(x + 1.0)

    def score(self, x, theta):
        theta = self.check_theta(theta)
        x = self.check_x(x)
        return x / theta - 1.0

    def loglik(self, data, theta):
        theta = self.check_theta(theta)
        return (special.xlogy(data.total, theta) - data.n * theta
                - math.fsum(special.gammaln(data.values + 1.0)))

    def mean_map(self, theta):
        return self.check_theta(theta)

    def var_map(self, theta):
        return self.check_theta(theta)

    def mle(self, data):
        self.check_x(data.values)
        if data.mean <= 0.0:
            raise DegenerateDataError("Poisson MLE is on the boundary (all observations are zero)")
        return data.mean

    def truncation_point(self, theta: float, mass: float = TRUNCATION_MASS) -> int:
        """Smallest x with P(X <= x) >= mass."""
        return int(stats.poisson.ppf(mass, theta))

    def spec_string(self):
        return "poisson"


@dataclass(frozen=True)
class NormalKnownVar(ExpFamilyModel):
    """Normal(theta, variance) with the variance fixed."""

    variance: float = 1.0
    name = "normal"

    def __post_init__(self):
        if not self.variance > 0:
            raise DomainError(f"normal model needs variance>0, got {self.variance}")

    def logpdf(self, x, theta):
        theta = self.check_theta(theta)
        x = self.check_x(x)
        return -0.5 * math.log(2 * math.pi * self.variance) - 0.5 * (x - theta) ** 2 / self.variance

    def score(self, x, theta):
        theta = self.check_theta(theta)
        x = self.check_x(x)
        return (x - theta) / self.variance

    def loglik(self, data, theta):
        theta = self.check_theta(theta)
        n, v = data.n, self.variance
        ss = n * data.variance + n * (data.mean - theta) ** 2
        return -0.5 * n * math.log(2 * math.pi * v) - 0.5 * ss / v

    def mean_map(self, theta):
        return self.check_theta(theta)

    def var_map(self, theta):
        return np.full_like(self.check_theta(theta), self.variance)

    def mle(self, data):
        return data.mean

    def spec_string(self):
        return f"normal:variance={self.variance!r}"


@dataclass(frozen=True, eq=False)
class GenericNatural(ExpFamilyModel):
    """Natural-form family given by its log-normaliser and derivatives.

    ``log_base`` (log c(x)) is only needed by routines that evaluate the
    density itself, such as the quadrature fallback of ``fisher_w_hat``.
    """

    b: Callable[[float], float]
    b_prime: Callable[[float], float]
    b_double_prime: Callable[[float], float]
    t: Callable[[float], float] | None = None  # identity when omitted
    log_base: Callable[[float], float] | None = None
    domain: tuple[float, float] = (-math.inf, math.inf)
    x_support: tuple[float, float] = (-math.inf, math.inf)
    discrete: bool = False
    name: str = "generic"

    def stat(self, x):
        if self.t is None:
            return np.asarray(x, dtype=float)
        return np.vectorize(self.t, otypes=[float])(x)

    def logpdf(self, x, theta):
        if self.log_base is None:
            raise NotImplementedError(f"{self.name}: density needs log_base")
        theta = self.check_theta(theta)
        x = self.check_x(x)
        lb = np.vectorize(self.log_base, otypes=[float])(x)
        return lb + theta * self.stat(x) - np.vectorize(self.b, otypes=[float])(theta)

    def score(self, x, theta):
        theta = self.check_theta(theta)
        x = self.check_x(x)
        return self.stat(x) - np.vectorize(self.b_prime, otypes=[float])(theta)

    def mean_map(self, theta):
        return np.vectorize(self.b_prime, otypes=[float])(self.check_theta(theta))

    def var_map(self, theta):
        return np.vectorize(self.b_double_prime, otypes=[float])(self.check_theta(theta))

    def solve_mean(self, target: float, tol: float = 1e-10) -> float:
        """theta with b'(theta) = target, by bracketed root finding."""
        lo, hi = self.domain

        def g(th):
            return self.b_prime(th) - target

        a, c = _initial_bracket(lo, hi)
        for _ in range(60):
            try:
                if g(a) * g(c) <= 0:
                    break
            except (OverflowError, FloatingPointError):
                pass
            a, c = _widen(a, c, lo, hi)
        else:
            raise CalibrationDomainError(
                f"{self.name}: b'(theta) = {target!r} has no bracketed solution in {self.domain}")
        theta = numerics.find_root(g, (a, c), tol=1e-15)
        if abs(g(theta)) > tol * max(1.0, abs(target)):
            raise CalibrationDomainError(f"{self.name}: mean map not solved to {tol}")
        return theta

    def mle(self, data):
        self.check_x(data.values)
        return self.solve_mean(math.fsum(self.stat(data.values)) / data.n)

    def spec_string(self):
        return self.name


def _initial_bracket(lo, hi):
    if math.isfinite(lo) and math.isfinite(hi):
        span = hi - lo
        return lo + 0.25 * span, hi - 0.25 * span
    if math.isfinite(lo):
        return lo + 0.5, lo + 2.0
    if math.isfinite(hi):
        return hi - 2.0, hi - 0.5
    return -1.0, 1.0


def _widen(a, c, lo, hi):
    width = c - a
    a2 = a - width if not math.isfinite(lo) else lo + 0.5 * (a - lo)
    c2 = c + width if not math.isfinite(hi) else hi - 0.5 * (hi - c)
    return a2, c2


def score(model: ExpFamilyModel, x, theta):
    return model.score(x, theta)


def mle(model: ExpFamilyModel, data: Dataset) -> float:
    return model.mle(data)


def poisson_natural() -> GenericNatural:
    """The Poisson family in natural form, theta = log(mean)."""
    return GenericNatural(
        b=math.exp, b_prime=math.exp, b_double_prime=math.exp,
        log_base=lambda x: -math.lgamma(x + 1.0),
        x_support=(0.0, math.inf), discrete=True, name="poisson-natural",
    )


def normal_natural(variance: float = 1.0) -> GenericNatural:
    """Normal with known variance in natural form: theta = mean / variance, t(x) = x."""
    v = float(variance)
    return GenericNatural(
        b=lambda th: 0.5 * v * th * th,
        b_prime=lambda th: v * th,
        b_double_prime=lambda th: v,
        log_base=lambda x: -0.5 * x * x / v - 0.5 * math.log(2 * math.pi * v),
        name="normal-natural",
    )
