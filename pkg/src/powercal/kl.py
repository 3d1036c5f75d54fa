"""Learning-rate calibration by matching expected Kullback-Leibler gain.

The power w solves

    mean_i KL(p_w(.|x_i) || p)  =  E_{x ~ f(.; theta_hat)} KL(p_1(.|x) || p)

with one observation per posterior on both sides.  There is no closed form
for w, so the residual is solved by bracketed root finding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import BracketError, CalibrationDomainError, ConvergenceError, DomainError
from .fisher import KL_NUMERIC, CalibrationResult, expected_under_model
from .models import Dataset, ExpFamilyModel, NormalKnownVar, NormalPrior, Prior
from .posterior import default_grid, log_unnormalized

DEFAULT_BRACKET = numerics.RootBracket(1e-4, 1e3)
MAX_EXPANSIONS = 3
MONOTONE_CHECK_POINTS = 25


def _closed_pair(model, prior) -> bool:
    return isinstance(model, NormalKnownVar) and isinstance(prior, NormalPrior)


def kl_gain(model: ExpFamilyModel, prior: Prior, w: float, x: float, method: str = "auto") -> float:
    """KL(p_w(.|x) || p) for the single-observation power posterior.

    ``method`` is ``"auto"``, ``"closed"`` (normal model with normal prior
    only) or ``"grid"``.
    """
    if not w > 0:
        raise DomainError(f"w must be positive for a proper power posterior, got {w}")
    if method not in ("auto", "closed", "grid"):
        raise ValueError(f"unknown method {method!r}")
    model.check_x(x)
    if method != "grid" and _closed_pair(model, prior):
        lam, m, v = prior.precision, prior.loc, model.variance
        post_prec = w / v + lam
        shift = w * (x - m) / (v * post_prec)
        return 0.5 * (lam / post_prec + lam * shift * shift - 1.0 + math.log(post_prec / lam))
    if method == "closed":
        raise DomainError("closed-form KL gain needs a normal model with a normal prior")
    return _kl_gain_grid(model, prior, w, x)


def _kl_gain_grid(model, prior, w, x, points: int = 2001) -> float:
    data = Dataset([x])
    theta = default_grid(model, prior, data, w, points=points)
    logu = log_unnormalized(model, prior, data, w, theta)
    top = np.max(logu)
    dens = np.exp(logu - top)
    log_z = math.log(float(np.trapezoid(dens, theta))) + top
    q = np.exp(logu - log_z)
    with np.errstate(invalid="ignore"):
        integrand = np.where(q > 0, q * (logu - log_z - prior.logpdf(theta)), 0.0)
    return max(float(np.trapezoid(integrand, theta)), 0.0)


def expected_kl_gain_model(model: ExpFamilyModel, prior: Prior, theta: float, w: float = 1.0,
                           method: str = "auto") -> float:
    """E[KL(p_w(.|X) || p)] for X ~ f(.; theta)."""
    if method != "grid" and _closed_pair(model, prior):
        lam, m, v = prior.precision, prior.loc, model.variance
        post_prec = w / v + lam
        mean_sq_shift = w * w * ((theta - m) ** 2 + v) / (v * post_prec) ** 2
        return 0.5 * (lam / post_prec + lam * mean_sq_shift - 1.0 + math.log(post_prec / lam))
    return expected_under_model(model, theta, lambda x: kl_gain(model, prior, w, x, method))


@dataclass(frozen=True)
class KlMatchProblem:
    model: ExpFamilyModel
    prior: Prior
    data: Dataset
    bracket: numerics.RootBracket = DEFAULT_BRACKET
    tol: float = numerics.DEFAULT_ROOT_TOL
    method: str = "auto"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.bracket.lo > 0:
            raise DomainError("KL bracket must lie in (0, inf)")
        if not self.tol > 0:
            raise DomainError("tol must be positive")


def kl_residual(problem: KlMatchProblem):
    """Return ``(R, rhs, theta_hat)`` with ``R(w) = lhs(w) - rhs``."""
    model, prior, data = problem.model, problem.prior, problem.data
    theta_hat = model.mle(data)
    rhs = expected_kl_gain_model(model, prior, theta_hat, 1.0, problem.method)
    xs = [float(x) for x in data.values]

    def lhs(w):
        return math.fsum(kl_gain(model, prior, w, x, problem.method) for x in xs) / data.n

    def residual(w):
        return lhs(w) - rhs

    residual.lhs = lhs
    return residual, rhs, theta_hat


def kl_match_w(problem: KlMatchProblem) -> CalibrationResult:
    """Solve the KL matching equation for w.

    The bracket is widened tenfold on each side, up to three times, until
    the residual changes sign.  Before solving, the residual is checked to be
    strictly increasing on a geometric w-grid; a violation aborts rather
    than risk returning a spurious root.
    """
    residual, rhs, theta_hat = kl_residual(problem)
    lo, hi = problem.bracket.lo, problem.bracket.hi
    r_lo, r_hi = residual(lo), residual(hi)
    for _ in range(MAX_EXPANSIONS):
        if r_lo * r_hi <= 0:
            break
        lo, hi = lo / 10.0, hi * 10.0
        r_lo, r_hi = residual(lo), residual(hi)
    if r_lo * r_hi > 0:
        raise BracketError(
            f"KL residual has no sign change on [{lo}, {hi}]: R(lo)={r_lo!r}, R(hi)={r_hi!r}",
            f_lo=r_lo, f_hi=r_hi)

    ws = np.geomspace(lo, hi, MONOTONE_CHECK_POINTS)
    rs = np.array([residual(float(w)) for w in ws])
    if np.any(np.diff(rs) <= 0):
        bad = int(np.argmin(np.diff(rs)))
        raise CalibrationDomainError(
            "KL residual is not strictly increasing in w: "
            f"R({ws[bad]:.6g})={rs[bad]:.12g} >= R({ws[bad + 1]:.6g})={rs[bad + 1]:.12g}")

    w = numerics.find_root(residual, (lo, hi), tol=problem.tol * 1e-3)
    r = residual(w)
    if abs(r) > problem.tol:
        raise ConvergenceError(f"KL residual {r!r} exceeds tol {problem.tol}", estimate=w, error=abs(r))
    lhs = residual.lhs(w)
    return CalibrationResult(
        w, rhs, lhs, KL_NUMERIC,
        {"theta_hat": theta_hat, "lhs": lhs, "rhs": rhs, "residual": r,
         "bracket_lo": lo, "bracket_hi": hi, "n": problem.data.n},
    )
