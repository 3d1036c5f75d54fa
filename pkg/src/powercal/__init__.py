"""Calibrating the power w of a power likelihood ``f(x; theta)^w p(theta)``.

The main entry points are :func:`fisher_w_hat` (match expected Fisher
divergence between prior and posterior) and :func:`kl_match_w` (match
expected Kullback-Leibler gain), together with conjugate and grid power
posteriors and the seeded simulation runners in :mod:`powercal.experiments`.
"""
from .errors import (
    BracketError,
    CalibrationDomainError,
    ConvergenceError,
    DegenerateDataError,
    DegenerateGridError,
    DomainError,
    EvaluationError,
    MomentError,
    NumericalError,
    PowerCalError,
    UnsupportedPairError,
)
from .fisher import (
    CalibrationResult,
    delta,
    delta_quadrature,
    fisher_w_hat,
    fisher_w_population,
    i_w,
    posterior_delta,
)
from .kl import KlMatchProblem, kl_gain, kl_match_w
from .models import (
    Dataset,
    GammaPrior,
    GenericNatural,
    NormalKnownVar,
    NormalPrior,
    Poisson,
    TabulatedPrior,
    mle,
    normal_natural,
    poisson_natural,
    prior_inverse_moments,
    score,
)
from .numerics import QuadratureSpec, RootBracket, find_root, integrate
from .posterior import DensityGrid, density_distance, power_posterior_conjugate, power_posterior_grid

__version__ = "0.1.0"
