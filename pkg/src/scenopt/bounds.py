"""Violation-probability tail bounds and their numerical inversion.

Everything here is a transformation of the binomial lower tail

    T(m, k, eps) = sum_{i=0}^{k} C(m, i) eps^i (1 - eps)^(m - i),

which bounds (or, for the tight families, equals) the probability that a
solution obtained after discarding scenarios violates more than an eps
fraction of the uncertainty.  Three formulas are exposed:

  cascade      T(m, r + d - 1, eps)             batched removal of r = ell*d
  classical    C(r+d-1, r) * T(m, r+d-1, eps)   one-at-a-time discarding,
                                                prefactored (can exceed 1)
  compression  T(m, zeta - 1, eps)              unique compression set of
                                                cardinality zeta (equality)

All functions are pure; evaluation is per-term in log space so that huge
binomial coefficients and tiny tail products neither overflow nor
underflow.  When C(m, i) is representable in double precision its exact
integer value anchors the term, which keeps the absolute error of the sum
comfortably below 1e-12 in the ranges this package works in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gammaln

_FORMULAS = ("cascade", "classical", "compression")

# math.comb values above this are converted to float via their logarithm;
# beyond _MAX_EXACT_COMB_M samples the exact big-integer coefficient is too
# expensive to build and log-gamma takes over entirely.
_MAX_EXACT_COMB = 1e300
_MAX_EXACT_COMB_M = 10_000


def _validate_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 <= eps <= 1.0 or math.isnan(eps):
        raise ValueError(f"epsilon must lie in [0, 1], got {eps}")
    return eps


def binom_tail(m: int, k_max: int, eps: float) -> float:
    """Lower binomial tail P[Bin(m, eps) <= k_max], 0 <= k_max < m.

    The usual regime runs a multiplicative term recurrence seeded by the
    log of the i=0 term, summing with compensated addition; every term
    stays a moderate float even when the binomial coefficient alone would
    overflow.  When (1-eps)^m itself underflows, each term is evaluated
    independently in log space instead.
    """
    m = int(m)
    k_max = int(k_max)
    eps = _validate_eps(eps)
    if m < 1:
        raise ValueError("m must be positive")
    if not 0 <= k_max < m:
        raise ValueError(f"k_max must satisfy 0 <= k_max < m, got {k_max}")
    if eps == 0.0:
        return 1.0
    if eps == 1.0:
        return 0.0
    log_1m = math.log1p(-eps)
    log_t0 = m * log_1m
    if log_t0 > -700.0:
        term = math.exp(log_t0)
        ratio = eps / (1.0 - eps)
        terms = [term]
        for i in range(1, k_max + 1):
            term *= ratio * (m - i + 1) / i
            terms.append(term)
        return min(1.0, math.fsum(terms))
    log_eps = math.log(eps)
    use_exact_comb = m <= _MAX_EXACT_COMB_M
    terms = []
    for i in range(k_max + 1):
        if use_exact_comb and (comb := math.comb(m, i)) <= _MAX_EXACT_COMB:
            log_comb = math.log(comb)
        else:
            log_comb = float(
                gammaln(m + 1) - gammaln(i + 1) - gammaln(m - i + 1)
            )
        terms.append(math.exp(log_comb + i * log_eps + (m - i) * log_1m))
    return min(1.0, math.fsum(terms))


@dataclass(frozen=True)
class BoundValue:
    """Evaluated tail probability; raw keeps any value above 1 unclamped."""

    value: float
    raw: float
    formula: str


def bound_cascade(m: int, d: int, r: int, eps: float) -> BoundValue:
    """Batched-removal bound T(m, r+d-1, eps); requires m > r + d."""
    _check_query(m, d, r)
    value = binom_tail(m, r + d - 1, eps)
    return BoundValue(value=value, raw=value, formula="cascade")


def bound_classical(m: int, d: int, r: int, eps: float) -> BoundValue:
    """Classical bound C(r+d-1, r) * T(m, r+d-1, eps); raw may exceed 1."""
    _check_query(m, d, r)
    tail = binom_tail(m, r + d - 1, eps)
    factor = math.comb(r + d - 1, r)
    if factor <= _MAX_EXACT_COMB:
        raw = factor * tail
    elif tail == 0.0:
        raw = 0.0
    else:
        log_factor = float(gammaln(r + d) - gammaln(r + 1) - gammaln(d))
        raw = math.exp(log_factor + math.log(tail))
    return BoundValue(value=min(raw, 1.0), raw=raw, formula="classical")


def bound_compression(m: int, zeta: int, eps: float) -> BoundValue:
    """Compression equality T(m, zeta-1, eps) for cardinality zeta < m."""
    m, zeta = int(m), int(zeta)
    if not 0 < zeta < m:
        raise ValueError(f"zeta must satisfy 0 < zeta < m, got zeta={zeta} m={m}")
    value = binom_tail(m, zeta - 1, eps)
    return BoundValue(value=value, raw=value, formula="compression")


def analytic_violation_cdf(m: int, r: int, eps: float) -> float:
    """Exact outer probability T(m, r, eps) for the 1-D uniform family.

    For minimizing x over [0, 1] subject to x >= delta_i with uniform
    samples and r single removals, the final solution sits below 1 - eps
    exactly when at most r samples exceed 1 - eps.  Coincides with the
    cascade bound at d = 1, which is what makes that bound tight.
    """
    m, r = int(m), int(r)
    if not 0 <= r < m:
        raise ValueError(f"r must satisfy 0 <= r < m, got r={r} m={m}")
    return binom_tail(m, r, eps)


def _check_query(m: int, d: int, r: int) -> None:
    m, d, r = int(m), int(d), int(r)
    if d < 1:
        raise ValueError("d must be at least 1")
    if r < 0:
        raise ValueError("r must be nonnegative")
    if m <= r + d:
        raise ValueError(f"m must exceed r + d, got m={m}, r+d={r + d}")


def _evaluate(formula: str, m: int, d: int, r: int, eps: float) -> float:
    if formula == "cascade":
        return bound_cascade(m, d, r, eps).value
    if formula == "classical":
        return bound_classical(m, d, r, eps).value
    if formula == "compression":
        return bound_compression(m, r + d, eps).value
    raise ValueError(f"unknown formula {formula!r}; expected one of {_FORMULAS}")


@dataclass(frozen=True)
class EpsilonInversion:
    """Result of inverting a bound in epsilon at confidence beta."""

    epsilon: float
    at_lower_boundary: bool


def invert_epsilon(
    m: int,
    d: int,
    r: int,
    beta: float,
    formula: str = "cascade",
    tol: float = 1e-9,
) -> EpsilonInversion:
    """Smallest eps with bound(m, d, r, eps) <= beta, by bisection.

    The tail is strictly decreasing in eps on (0, 1) for k_max < m, so the
    acceptance region is an interval reaching eps = 1 and bisection to an
    absolute width of tol locates its left endpoint.  When even eps -> 0
    already satisfies beta (only possible for beta >= the eps=0 value), the
    boundary flag is set and 0 is returned.
    """
    beta = float(beta)
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    if _evaluate(formula, m, d, r, 0.0) <= beta:
        return EpsilonInversion(epsilon=0.0, at_lower_boundary=True)
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _evaluate(formula, m, d, r, mid) <= beta:
            hi = mid
        else:
            lo = mid
    return EpsilonInversion(epsilon=hi, at_lower_boundary=False)


def max_removable(
    m: int,
    d: int,
    eps: float,
    beta: float,
    formula: str = "cascade",
    batch: bool = False,
) -> int:
    """Largest r with bound(m, d, r, eps) <= beta; 0 when even r=0 fails.

    The bound increases with r, so an upward scan stops at the first
    failure.  With batch=True the result is floored to the nearest multiple
    of d, matching schemes that can only discard whole batches.
    """
    beta = float(beta)
    eps = _validate_eps(eps)
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    best = 0
    r = 0
    while m > r + d:
        if _evaluate(formula, m, d, r, eps) <= beta:
            best = r
            r += 1
        else:
            break
    if batch:
        best -= best % d
    return best
