"""Population solvers for two-group Gaussian models.

Models place one Gaussian per (label, group) cell together with joint
cell probabilities.  Within the solver scope (equal within-group
variances and a higher class-1 mean), the optimal classifiers threshold
the feature axis, so each solver reduces to root finding on one or two
scalar thresholds and every reported error rate is an explicit normal
CDF expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr, ndtri

from .core import ErrorReport
from .errors import NonMonotoneLikelihoodRatio, ParseError, RootNotBracketed
from . import textio

_CELL_TAGS = ("0a", "1a", "0b", "1b")
_BISECT_MAX_ITER = 200
_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class GaussianGroupModel:
    """Per-cell Gaussian parameters and joint cell probabilities.

    Cell tags read <label><group>: mu_0a is the class-0 mean of group a.
    Joint probabilities must be positive and sum to 1.
    """

    mu_0a: float
    var_0a: float
    p_0a: float
    mu_1a: float
    var_1a: float
    p_1a: float
    mu_0b: float
    var_0b: float
    p_0b: float
    mu_1b: float
    var_1b: float
    p_1b: float

    def __post_init__(self):
        for tag in _CELL_TAGS:
            if getattr(self, f"var_{tag}") <= 0.0:
                raise ValueError(f"var_{tag} must be positive")
            if getattr(self, f"p_{tag}") <= 0.0:
                raise ValueError(f"p_{tag} must be positive")
        total = self.p_0a + self.p_1a + self.p_0b + self.p_1b
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"joint probabilities sum to {total}, expected 1")

    @property
    def p0(self) -> float:
        """P(Y = 0)."""

        return self.p_0a + self.p_0b

    @property
    def p_a_0(self) -> float:
        """P(S = a | Y = 0)."""

        return self.p_0a / (self.p_0a + self.p_0b)

    @property
    def p_a_1(self) -> float:
        """P(S = a | Y = 1)."""

        return self.p_1a / (self.p_1a + self.p_1b)

    def errors_at(self, threshold_a: float, threshold_b: float) -> ErrorReport:
        """Population error rates of the strict-> rule at the given cuts."""

        r0_a = ndtr((self.mu_0a - threshold_a) / math.sqrt(self.var_0a))
        r1_a = ndtr((threshold_a - self.mu_1a) / math.sqrt(self.var_1a))
        r0_b = ndtr((self.mu_0b - threshold_b) / math.sqrt(self.var_0b))
        r1_b = ndtr((threshold_b - self.mu_1b) / math.sqrt(self.var_1b))
        return ErrorReport.from_rates(
            r0_a, r0_b, r1_a, r1_b, self.p_a_0, self.p_a_1
        )

    def with_class0_prob(self, new_p0: float) -> "GaussianGroupModel":
        """Rescale P(Y = 0) while holding every P(S = s | Y = y) fixed."""

        if not 0.0 < new_p0 < 1.0:
            raise ValueError(f"new_p0 must lie in (0, 1), got {new_p0}")
        if new_p0 == self.p0:
            return self
        p1 = 1.0 - new_p0
        return GaussianGroupModel(
            mu_0a=self.mu_0a, var_0a=self.var_0a, p_0a=self.p_a_0 * new_p0,
            mu_1a=self.mu_1a, var_1a=self.var_1a, p_1a=self.p_a_1 * p1,
            mu_0b=self.mu_0b, var_0b=self.var_0b, p_0b=(1.0 - self.p_a_0) * new_p0,
            mu_1b=self.mu_1b, var_1b=self.var_1b, p_1b=(1.0 - self.p_a_1) * p1,
        )


@dataclass(frozen=True)
class OracleSolution:
    """Feature-axis thresholds and the error rates they imply."""

    threshold_a: float
    threshold_b: float
    report: ErrorReport


class InvarianceCheck(NamedTuple):
    invariant: bool
    base: OracleSolution
    rescaled: OracleSolution


@dataclass(frozen=True)
class FeasibilityCurves:
    """Point sequences of the two binding loci, columns (c_a, c_b).

    ``np_locus`` traces R0 = alpha (downward: c_a falls as c_b rises)
    and ``eo_locus`` traces the binding disparity side
    r1_a - r1_b = sign * epsilon (upward).
    """

    np_locus: np.ndarray
    eo_locus: np.ndarray


def _group_params(model: GaussianGroupModel):
    """Per-group (mu0, mu1, sigma) under the monotone-score scope."""

    out = []
    for grp in ("a", "b"):
        mu0 = getattr(model, f"mu_0{grp}")
        mu1 = getattr(model, f"mu_1{grp}")
        v0 = getattr(model, f"var_0{grp}")
        v1 = getattr(model, f"var_1{grp}")
        if abs(v0 - v1) > 1e-12 * max(v0, v1):
            raise NonMonotoneLikelihoodRatio(
                f"group {grp}: class variances differ ({v0} vs {v1})"
            )
        if not mu1 > mu0:
            raise NonMonotoneLikelihoodRatio(
                f"group {grp}: class-1 mean must exceed class-0 mean "
                f"({mu1} vs {mu0})"
            )
        out.append((mu0, mu1, math.sqrt(v0)))
    return out


def bayes_oracle(model: GaussianGroupModel) -> OracleSolution:
    """Accuracy-optimal thresholds: posterior odds equal 1 per group.

    With equal within-group variances the log odds are linear in the
    feature, giving the closed form
    sigma^2 log(p_0s / p_1s) / (mu1 - mu0) + (mu0 + mu1) / 2.
    """

    (mu0a, mu1a, sa), (mu0b, mu1b, sb) = _group_params(model)
    c_a = sa * sa * math.log(model.p_0a / model.p_1a) / (mu1a - mu0a) + 0.5 * (mu0a + mu1a)
    c_b = sb * sb * math.log(model.p_0b / model.p_1b) / (mu1b - mu0b) + 0.5 * (mu0b + mu1b)
    return OracleSolution(c_a, c_b, model.errors_at(c_a, c_b))


def np_oracle(model: GaussianGroupModel, alpha: float) -> OracleSolution:
    """Shared-threshold solution of the type I constrained program.

    Finds the scalar cut c with R0(c, c) = alpha by bisection; R0 is
    continuous and strictly decreasing in c, so the root is unique.
    Both groups receive the same feature threshold.
    """

    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    _group_params(model)
    lo = min(model.mu_0a - 12.0 * math.sqrt(model.var_0a),
             model.mu_0b - 12.0 * math.sqrt(model.var_0b))
    hi = max(model.mu_0a + 12.0 * math.sqrt(model.var_0a),
             model.mu_0b + 12.0 * math.sqrt(model.var_0b))

    def residual(c):
        return model.errors_at(c, c).r0 - alpha

    span = hi - lo
    for _ in range(60):
        if residual(lo) > 0.0:
            break
        lo -= span
    else:
        raise RootNotBracketed("could not bracket the type I constraint from below")
    for _ in range(60):
        if residual(hi) < 0.0:
            break
        hi += span
    else:
        raise RootNotBracketed("could not bracket the type I constraint from above")
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        value = residual(mid)
        if abs(value) <= _RESIDUAL_TOL and hi - lo <= 1e-12 * max(1.0, abs(mid)):
            break
        if value > 0.0:
            lo = mid
        else:
            hi = mid
    c = 0.5 * (lo + hi)
    return OracleSolution(c, c, model.errors_at(c, c))


def np_eo_oracle(
    model: GaussianGroupModel, alpha: float, epsilon: float
) -> OracleSolution:
    """Type II optimal thresholds under both the type I and disparity caps.

    When the shared-threshold solution already keeps |r1_a - r1_b|
    within epsilon it is returned unchanged.  Otherwise the disparity
    cap binds on the violated side and the solution is the intersection
    of {R0 = alpha} with {r1_a - r1_b = sign * epsilon}, found by
    bisection over rho = r0_b with c_a recovered from the type I
    constraint at every step.
    """

    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    np_sol = np_oracle(model, alpha)
    disparity = np_sol.report.r1_a - np_sol.report.r1_b
    if abs(disparity) <= epsilon:
        return np_sol
    sign = 1.0 if disparity > 0.0 else -1.0
    target = sign * epsilon
    (mu0a, mu1a, sa), (mu0b, mu1b, sb) = _group_params(model)
    p_a0 = model.p_a_0
    p_b0 = 1.0 - p_a0

    def thresholds_at(rho):
        # rho is the group-b type I error; the type I constraint fixes a's
        q_a = (alpha - rho * p_b0) / p_a0
        q_a = min(max(q_a, 1e-300), 1.0 - 1e-16)
        c_b = mu0b - sb * ndtri(rho)
        c_a = mu0a - sa * ndtri(q_a)
        return c_a, c_b

    def residual(rho):
        c_a, c_b = thresholds_at(rho)
        return ndtr((c_a - mu1a) / sa) - ndtr((c_b - mu1b) / sb) - target

    rho_lo = max(0.0, (alpha - p_a0) / p_b0)
    rho_hi = min(1.0, alpha / p_b0)
    width = rho_hi - rho_lo
    lo = rho_lo + 1e-13 * width
    hi = rho_hi - 1e-13 * width
    f_lo = residual(lo)
    f_hi = residual(hi)
    if f_lo > 0.0 or f_hi < 0.0:
        raise RootNotBracketed(
            f"disparity target {target} unreachable on the type I locus"
        )
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-16 * max(1.0, abs(mid)):
            break
        if residual(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    rho = 0.5 * (lo + hi)
    c_a, c_b = thresholds_at(rho)
    return OracleSolution(c_a, c_b, model.errors_at(c_a, c_b))


def feasibility_curves(
    model: GaussianGroupModel, alpha: float, epsilon: float, grid: int = 200
) -> FeasibilityCurves:
    """Sample the type I locus and the binding disparity locus.

    The disparity side is the one the shared-threshold solution
    violates, falling back to +epsilon when nothing binds, so when the
    disparity cap is active the two curves cross at the constrained
    optimum.
    """

    if grid < 2:
        raise ValueError("grid must be at least 2")
    (mu0a, mu1a, sa), (mu0b, mu1b, sb) = _group_params(model)
    np_sol = np_oracle(model, alpha)
    disparity = np_sol.report.r1_a - np_sol.report.r1_b
    sign = 1.0 if (abs(disparity) <= epsilon or disparity > 0.0) else -1.0
    p_a0 = model.p_a_0
    p_b0 = 1.0 - p_a0
    rho_lo = max(0.0, (alpha - p_a0) / p_b0)
    rho_hi = min(1.0, alpha / p_b0)
    width = rho_hi - rho_lo
    rhos = np.linspace(rho_lo + 1e-6 * width, rho_hi - 1e-6 * width, grid)
    q_a = (alpha - rhos * p_b0) / p_a0
    np_ca = mu0a - sa * ndtri(q_a)
    np_cb = mu0b - sb * ndtri(rhos)
    order = np.argsort(np_cb)
    np_locus = np.column_stack([np_ca[order], np_cb[order]])

    cb_grid = np.linspace(np_cb.min(), np_cb.max(), grid)
    r1_b = ndtr((cb_grid - mu1b) / sb)
    r1_a = r1_b + sign * epsilon
    valid = (r1_a > 0.0) & (r1_a < 1.0)
    eo_ca = mu1a + sa * ndtri(r1_a[valid])
    eo_locus = np.column_stack([eo_ca, cb_grid[valid]])
    return FeasibilityCurves(np_locus=np_locus, eo_locus=eo_locus)


def check_prior_invariance(
    model: GaussianGroupModel,
    alpha: float,
    epsilon: float,
    new_p0: float,
    tol: float = 1e-7,
) -> InvarianceCheck:
    """Solve the constrained program before and after rescaling P(Y = 0).

    Both constraints depend on the model only through the conditional
    pieces P(S | Y) and the cell Gaussians, so the thresholds should not
    move; the check reports whether they agree within ``tol``.
    """

    base = np_eo_oracle(model, alpha, epsilon)
    rescaled = np_eo_oracle(model.with_class0_prob(new_p0), alpha, epsilon)
    invariant = (
        abs(base.threshold_a - rescaled.threshold_a) <= tol
        and abs(base.threshold_b - rescaled.threshold_b) <= tol
    )
    return InvarianceCheck(invariant, base, rescaled)


def load_model(path) -> GaussianGroupModel:
    """Read a model description file with mu_/var_/p_ entries per cell."""

    entries = textio.read_key_values(path)
    kwargs = {}
    for tag in _CELL_TAGS:
        for prefix in ("mu", "var", "p"):
            key = f"{prefix}_{tag}"
            kwargs[key] = textio.take_float(entries, key)
    known = set(kwargs)
    extra = set(entries) - known
    if extra:
        raise ParseError(f"unknown keys in model file: {sorted(extra)}")
    return GaussianGroupModel(**kwargs)
