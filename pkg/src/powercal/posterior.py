"""Power posteriors ``p_w(theta | data) ∝ f(data; theta)^w p(theta)``.

Conjugate pairs return a prior object of the same family; any pair can be
tabulated on a grid, evaluated in log space and max-subtracted before
exponentiation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _integrate
from scipy import optimize as _optimize
from scipy import stats

from . import numerics
from .errors import DegenerateGridError, DomainError, UnsupportedPairError
from .models import (
    Dataset,
    ExpFamilyModel,
    GammaPrior,
    NormalKnownVar,
    NormalPrior,
    Poisson,
    Prior,
)

DEFAULT_POINTS = 2001
DEFAULT_WIDTH = 8.0


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Normalised density tabulated on a strictly increasing grid.

    ``normalization_error`` compares the trapezoid and Simpson normalising
    constants; it estimates the discretisation error of the tabulation.
    """

    theta: np.ndarray
    density: np.ndarray
    normalization_error: float = 0.0

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        density = np.asarray(self.density, dtype=float)
        if theta.ndim != 1 or theta.shape != density.shape or theta.size < 2:
            raise ValueError("theta and density must be 1-D arrays of the same length >= 2")
        if np.any(np.diff(theta) <= 0):
            raise ValueError("theta grid must be strictly increasing")
        if np.any(density < 0) or not np.all(np.isfinite(density)):
            raise ValueError("density must be finite and non-negative")
        theta.setflags(write=False)
        density.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "density", density)

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.theta))

    def mean(self) -> float:
        return float(np.trapezoid(self.theta * self.density, self.theta))

    def sd(self) -> float:
        m = self.mean()
        return math.sqrt(float(np.trapezoid((self.theta - m) ** 2 * self.density, self.theta)))

    def mode(self) -> float:
        return float(self.theta[int(np.argmax(self.density))])

    def at(self, theta) -> np.ndarray:
        return np.interp(theta, self.theta, self.density, left=0.0, right=0.0)


# --------------------------------------------------------------------------
# conjugate path
# --------------------------------------------------------------------------

def power_posterior_conjugate(model: ExpFamilyModel, prior: Prior, data: Dataset, w: float) -> Prior:
    """Closed-form power posterior for the normal-normal and Poisson-gamma pairs.

    ``w = 0`` returns the prior unchanged.
    """
    if not w >= 0:
        raise DomainError(f"w must be non-negative, got {w}")
    if isinstance(model, NormalKnownVar) and isinstance(prior, NormalPrior):
        v = model.variance
        precision = w * data.n / v + prior.precision
        loc = (w * data.total / v + prior.precision * prior.loc) / precision
        return NormalPrior(loc, precision)
    if isinstance(model, Poisson) and isinstance(prior, GammaPrior):
        model.check_x(data.values)
        return GammaPrior(prior.shape + w * data.total, prior.rate + w * data.n)
    raise UnsupportedPairError(
        f"no conjugate power posterior for {type(model).__name__} with {type(prior).__name__}")


# --------------------------------------------------------------------------
# grid path
# --------------------------------------------------------------------------

def log_unnormalized(model: ExpFamilyModel, prior: Prior, data: Dataset, w: float, theta) -> np.ndarray:
    """``w * loglik(theta) + log p(theta)``, -inf outside the parameter domain."""
    theta = np.asarray(theta, dtype=float)
    out = np.full(theta.shape, -np.inf)
    lo = max(model.domain[0], prior.support[0])
    hi = min(model.domain[1], prior.support[1])
    ok = (theta > lo) & (theta < hi)
    if np.any(ok):
        t = theta[ok]
        lp = np.asarray(prior.logpdf(t), dtype=float)
        ll = np.asarray(model.loglik(data, t), dtype=float) if w > 0 else 0.0
        out[ok] = w * ll + lp
    return out


def _laplace(model, prior, data, w) -> tuple[float, float]:
    lo = max(model.domain[0], prior.support[0])
    hi = min(model.domain[1], prior.support[1])
    center, scale = prior.bulk()
    if w > 0:
        try:
            center = float(np.clip(model.mle(data), lo, hi))
        except (ArithmeticError, ValueError):
            pass
    a = max(lo, center - 50 * scale)
    b = min(hi, center + 50 * scale)
    span = b - a
    a, b = a + 1e-9 * span, b - 1e-9 * span

    def neg(t):
        v = float(log_unnormalized(model, prior, data, w, np.array([t]))[0])
        return -v if math.isfinite(v) else 1e300

    res = _optimize.minimize_scalar(neg, bounds=(a, b), method="bounded",
                                    options={"xatol": 1e-10 * max(1.0, abs(center))})
    mode = float(res.x)
    h = 1e-4 * max(scale / max(1.0, math.sqrt(max(w * data.n, 1.0))), 1e-12)
    if lo < mode - h and mode + h < hi:
        curv = numerics.second_difference(lambda t: -neg(t), mode, h)
    else:
        curv = -1.0 / scale ** 2
    sd = 1.0 / math.sqrt(-curv) if curv < 0 else scale
    return mode, sd


def posterior_location(model, prior, data, w) -> tuple[float, float]:
    """(center, sd) of the power posterior: exact for conjugate pairs, Laplace otherwise."""
    try:
        post = power_posterior_conjugate(model, prior, data, w)
        return post.mean, math.sqrt(post.var)
    except UnsupportedPairError:
        return _laplace(model, prior, data, w)


def default_grid(model, prior, data, w, points: int = DEFAULT_POINTS,
                 width: float = DEFAULT_WIDTH) -> np.ndarray:
    center, sd = posterior_location(model, prior, data, w)
    lo = max(model.domain[0], prior.support[0])
    hi = min(model.domain[1], prior.support[1])
    upper = center + width * sd
    try:
        post = power_posterior_conjugate(model, prior, data, w)
    except UnsupportedPairError:
        post = None
    if isinstance(post, GammaPrior):
        # right skew: +width sd can leave ~1e-6 of the mass outside the grid
        upper = max(upper, float(stats.gamma.isf(1e-15, post.shape, scale=1.0 / post.rate)))
    return np.linspace(max(lo, center - width * sd), min(hi, upper), points)


def power_posterior_grid(model: ExpFamilyModel, prior: Prior, data: Dataset, w: float,
                         points: int = DEFAULT_POINTS, width: float = DEFAULT_WIDTH,
                         grid=None) -> DensityGrid:
    """Tabulated, normalised power posterior.

    The default grid spans ``width`` posterior standard deviations either
    side of the centre (conjugate moments, or a Laplace approximation),
    clipped to the parameter domain.
    """
    if not w >= 0:
        raise DomainError(f"w must be non-negative, got {w}")
    theta = default_grid(model, prior, data, w, points, width) if grid is None else np.asarray(grid, float)
    logp = log_unnormalized(model, prior, data, w, theta)
    top = np.max(logp)
    if not np.isfinite(top):
        raise DegenerateGridError("unnormalised posterior is zero (or non-finite) on the whole grid")
    dens = np.exp(logp - top)
    z_trap = float(np.trapezoid(dens, theta))
    z_simp = float(_integrate.simpson(dens, x=theta))
    if not z_trap > 0:
        raise DegenerateGridError("posterior grid has zero mass")
    return DensityGrid(theta, dens / z_trap, abs(z_trap / z_simp - 1.0))


def tabulate(prior: Prior, grid) -> DensityGrid:
    """Tabulate a closed-form density (e.g. a conjugate posterior) on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    dens = np.asarray(prior.pdf(grid), dtype=float)
    z = float(np.trapezoid(dens, grid))
    if not z > 0:
        raise DegenerateGridError("density has no mass on the grid")
    return DensityGrid(grid, dens / z, abs(z - 1.0))


def density_distance(g1: DensityGrid, g2: DensityGrid) -> float:
    """L1 distance between two tabulated densities.

    Both are read as piecewise-linear interpolants, zero outside their own
    grid, and the absolute difference is integrated exactly on the merged
    grid (trapezoid on every segment without a sign change).
    """
    t = np.union1d(g1.theta, g2.theta)
    left, right = t[:-1], t[1:]
    h = right - left

    def seg_values(g):
        inside = (left >= g.theta[0]) & (right <= g.theta[-1])
        lv = np.where(inside, np.interp(left, g.theta, g.density), 0.0)
        rv = np.where(inside, np.interp(right, g.theta, g.density), 0.0)
        return lv, rv

    l1, r1 = seg_values(g1)
    l2, r2 = seg_values(g2)
    a, b = l1 - l2, r1 - r2
    same = a * b >= 0
    absa, absb = np.abs(a), np.abs(b)
    denom = np.where(same, 1.0, absa + absb)
    seg = np.where(same, 0.5 * h * (absa + absb), 0.5 * h * (a * a + b * b) / denom)
    return math.fsum(seg)
