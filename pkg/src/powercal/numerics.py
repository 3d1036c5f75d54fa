"""Numerical kernels: 1-D quadrature, bracketed root finding, finite differences.

The adaptive scheme delegates to QUADPACK through :func:`scipy.integrate.quad`
(QAGS on finite pieces, QAGI on infinite pieces, which maps a semi-infinite
range through the rational substitution ``x = a + (1 - t)/t``).  The fixed-node
scheme is plain Gauss-Legendre, with ``x = a + u/(1 - u)`` on semi-infinite
pieces and ``x = atanh(u)`` on the whole line.

Root finding wraps :func:`scipy.optimize.brentq`; the wrapper adds the bracket
checks, NaN trapping and the residual contract used by the calibrators.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy import optimize as _optimize

from .errors import BracketError, ConvergenceError, EvaluationError

DEFAULT_ABS_TOL = 1e-10
DEFAULT_REL_TOL = 1e-8
DEFAULT_ROOT_TOL = 1e-10

ADAPTIVE = "adaptive-subdivision"
GAUSS = "fixed-node-gauss"


@dataclass(frozen=True)
class QuadratureSpec:
    scheme: str = ADAPTIVE
    abs_tol: float = DEFAULT_ABS_TOL
    rel_tol: float = DEFAULT_REL_TOL
    max_subdivisions: int = 200
    # node count for the fixed-node scheme (error estimated against 2x nodes)
    nodes: int = 64

    def __post_init__(self):
        if self.scheme not in (ADAPTIVE, GAUSS):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1 or self.nodes < 1:
            raise ValueError("max_subdivisions and nodes must be >= 1")


DEFAULT_QUADRATURE = QuadratureSpec()


@dataclass(frozen=True)
class RootBracket:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"bracket requires lo < hi, got [{self.lo}, {self.hi}]")


def _pieces(lo: float, hi: float, breakpoints: Iterable[float] | None) -> list[tuple[float, float]]:
    cuts = sorted({float(p) for p in (breakpoints or ()) if lo < p < hi and math.isfinite(p)})
    edges = [lo, *cuts, hi]
    return list(zip(edges[:-1], edges[1:]))


def _quad_piece(f, a, b, spec: QuadratureSpec, abs_tol: float):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _integrate.IntegrationWarning)
        out = _integrate.quad(
            f, a, b, epsabs=abs_tol, epsrel=spec.rel_tol,
            limit=spec.max_subdivisions, full_output=1,
        )
    value, err = out[0], out[1]
    # ier is absent from the tuple when the call succeeded
    ier = 0 if len(out) == 3 else 1
    return value, err, ier


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _gauss_piece(f, a, b, n: int) -> float:
    nodes, weights = _gauss_legendre(n)
    u = 0.5 * (nodes + 1.0)  # on (0, 1)
    wu = 0.5 * weights
    if math.isfinite(a) and math.isfinite(b):
        x = a + (b - a) * u
        jac = np.full_like(u, b - a)
    elif math.isfinite(a):
        x = a + u / (1.0 - u)
        jac = 1.0 / (1.0 - u) ** 2
    elif math.isfinite(b):
        x = b - u / (1.0 - u)
        jac = 1.0 / (1.0 - u) ** 2
    else:
        s = 2.0 * u - 1.0  # on (-1, 1)
        x = np.arctanh(s)
        jac = 2.0 / (1.0 - s * s)
    vals = np.array([f(float(xi)) for xi in x])
    return float(np.sum(wu * jac * vals))


def integrate(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    breakpoints: Sequence[float] | None = None,
) -> float:
    """Integrate ``f`` over ``[lo, hi]``; either limit may be infinite.

    ``breakpoints`` split the range into pieces that are integrated
    separately, which keeps narrow peaks on infinite ranges from being
    missed.  Raises :class:`ConvergenceError` (carrying the best estimate)
    when the combined error estimate exceeds
    ``max(abs_tol, rel_tol * |result|)``.
    """
    if lo == hi:
        return 0.0
    if lo > hi:
        return -integrate(f, hi, lo, spec, breakpoints)

    def g(x):
        y = f(x)
        if y != y:
            raise EvaluationError(f"integrand returned NaN at x={x!r}")
        return y

    pieces = _pieces(float(lo), float(hi), breakpoints)
    total = 0.0
    total_err = 0.0
    failed = False  # QUADPACK flagged a problem on some piece
    if spec.scheme == ADAPTIVE:
        piece_tol = spec.abs_tol / len(pieces)
        parts = []
        for a, b in pieces:
            value, err, ier = _quad_piece(g, a, b, spec, piece_tol)
            parts.append(value)
            total_err += err
            failed |= ier != 0
        total = math.fsum(parts)
    else:
        parts = []
        for a, b in pieces:
            coarse = _gauss_piece(g, a, b, spec.nodes)
            fine = _gauss_piece(g, a, b, 2 * spec.nodes)
            parts.append(fine)
            total_err += abs(fine - coarse)
        total = math.fsum(parts)

    bound = max(spec.abs_tol, spec.rel_tol * abs(total))
    if not math.isfinite(total) or total_err > bound:
        reason = "subdivision budget exhausted" if failed else "did not reach tolerance"
        raise ConvergenceError(
            f"quadrature on [{lo}, {hi}] {reason} "
            f"(error estimate {total_err:.3g} > {bound:.3g})",
            estimate=total, error=total_err,
        )
    return total


def find_root(
    f: Callable[[float], float],
    bracket: RootBracket | tuple[float, float],
    tol: float = DEFAULT_ROOT_TOL,
) -> float:
    """Root of ``f`` inside ``bracket`` by Brent's method.

    The returned point lies in the bracket and either ``|f(x)| <= tol`` or the
    final bracket width is at most ``tol``.
    """
    if not isinstance(bracket, RootBracket):
        bracket = RootBracket(*bracket)
    if tol <= 0:
        raise ValueError("tol must be positive")

    def g(x):
        try:
            y = float(f(x))
        except (ArithmeticError, ValueError) as exc:
            raise EvaluationError(f"function failed at x={x!r}: {exc}") from exc
        if y != y:
            raise EvaluationError(f"function returned NaN at x={x!r}")
        return y

    f_lo, f_hi = g(bracket.lo), g(bracket.hi)
    if f_lo == 0.0:
        return bracket.lo
    if f_hi == 0.0:
        return bracket.hi
    if f_lo * f_hi > 0:
        raise BracketError(
            f"no sign change on [{bracket.lo}, {bracket.hi}]: "
            f"f(lo)={f_lo!r}, f(hi)={f_hi!r}",
            f_lo=f_lo, f_hi=f_hi,
        )
    x, info = _optimize.brentq(
        g, bracket.lo, bracket.hi, xtol=tol, rtol=4 * np.finfo(float).eps,
        maxiter=500, full_output=True, disp=False,
    )
    if not info.converged:
        raise ConvergenceError(f"brentq stopped: {info.flag}", estimate=x)
    return float(min(max(x, bracket.lo), bracket.hi))


def central_difference(f: Callable[[float], float], x: float, h: float = 1e-5) -> float:
    """Second-order central difference ``(f(x+h) - f(x-h)) / 2h``."""
    return (f(x + h) - f(x - h)) / (2.0 * h)


def second_difference(f: Callable[[float], float], x: float, h: float = 1e-4) -> float:
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
