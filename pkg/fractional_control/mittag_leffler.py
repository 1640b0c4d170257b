"""Two-parameter Mittag-Leffler function on the negative real axis.

E_{alpha,beta}(x) = sum_k x^k / Gamma(alpha*k + beta) is the scalar symbol of
every solution family of a diagonal generator. Three regimes are used:

* compensated double precision Taylor series while the largest series term
  keeps cancellation below the tolerance;
* the same series in mpmath at a working precision raised by the number of
  digits lost to cancellation;
* the asymptotic expansion for large |x|, once its truncation error is below
  the tolerance. For 1 < alpha <= 2 it carries the damped oscillatory pair of
  exponential terms in addition to the algebraic series.
"""
import logging
import math
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import mpmath
import numpy as np
from scipy.special import gammaln, rgamma

from fractional_control.errors import DomainError, MittagLefflerConvergenceError, OracleRangeError

logger = logging.getLogger(__name__)

FLOAT_SERIES_LIMIT = 50.0
ORACLE_LIMIT = 50.0
ORACLE_MAX_DIGITS = 30
_EPS = float(np.finfo(np.float64).eps)
_LN10 = math.log(10.0)
_contexts = threading.local()


@dataclass(frozen=True)
class MlParams:
    """Order, second parameter and accuracy controls of one E_{alpha,beta}"""
    alpha: float
    beta: float = 1.0
    series_tol: float = 1e-12
    max_terms: int = 500

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.series_tol > 0.0:
            raise ValueError(f"series_tol must be positive, got {self.series_tol}")
        if self.max_terms < 8:
            raise ValueError(f"max_terms must be at least 8, got {self.max_terms}")


def ml(params: MlParams, x: float) -> float:
    """Evaluate E_{alpha,beta}(x) for x <= 0 to absolute accuracy 10*series_tol"""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"Mittag-Leffler argument must be finite, got {x}")
    if x > 0.0:
        raise DomainError(f"Mittag-Leffler argument must be non-positive, got {x}")
    return _ml_cached(params, x)


def ml_vector(params: MlParams, xs) -> np.ndarray:
    """Element-wise ml over an array of non-positive arguments"""
    values = np.asarray(xs, dtype=float)
    flat = [ml(params, x) for x in values.ravel()]
    return np.asarray(flat, dtype=float).reshape(values.shape)


def asymptotic_threshold(alpha: float, tol: float) -> float:
    """|x| beyond which the asymptotic expansion reaches tol"""
    return (math.log(10.0 / tol) + 5.0) ** alpha


@lru_cache(maxsize=1 << 16)
def _ml_cached(params: MlParams, x: float) -> float:
    if x == 0.0:
        return float(rgamma(params.beta))
    r = -x
    if r > asymptotic_threshold(params.alpha, params.series_tol):
        return _asymptotic(params, r)

    log_peak, k_peak = _series_peak(params.alpha, params.beta, r, params.max_terms)
    if r <= FLOAT_SERIES_LIMIT and math.exp(log_peak) * 8.0 * _EPS <= params.series_tol:
        return _float_series(params, x, k_peak)
    logger.debug("mpmath series for E_{%g,%g}(%g), peak term 1e%.1f",
                 params.alpha, params.beta, x, log_peak / _LN10)
    return _mp_series(params, x, log_peak, k_peak)


def _series_peak(alpha: float, beta: float, r: float, max_terms: int) -> Tuple[float, int]:
    """Log-magnitude and index of the largest Taylor term r^k / Gamma(alpha*k + beta)"""
    ks = np.arange(max_terms, dtype=float)
    logs = ks * math.log(r) - gammaln(alpha * ks + beta)
    k_peak = int(np.argmax(logs))
    return float(logs[k_peak]), k_peak


def _mp_context(dps: int) -> mpmath.MPContext:
    """mpmath context private to the calling thread, set to dps digits"""
    ctx = getattr(_contexts, "ctx", None)
    if ctx is None:
        ctx = _contexts.ctx = mpmath.MPContext()
    ctx.dps = dps
    return ctx


def _float_series(params: MlParams, x: float, k_peak: int) -> float:
    total = 0.0
    compensation = 0.0
    term = 0.0
    for k in range(params.max_terms):
        term = x ** k * float(rgamma(params.alpha * k + params.beta))
        # Kahan summation
        corrected = term - compensation
        running = total + corrected
        compensation = (running - total) - corrected
        total = running
        if k >= k_peak and abs(term) < 0.1 * params.series_tol:
            return total
    raise MittagLefflerConvergenceError(
        f"Taylor series for E_{{{params.alpha},{params.beta}}}({x}) did not converge "
        f"within {params.max_terms} terms", abs(term))


def _mp_series(params: MlParams, x: float, log_peak: float, k_peak: int) -> float:
    digits_lost = max(0, math.ceil(log_peak / _LN10))
    dps = digits_lost + math.ceil(-math.log10(params.series_tol)) + 10
    ctx = _mp_context(dps)
    xm = ctx.mpf(x)
    alpha = ctx.mpf(params.alpha)
    beta = ctx.mpf(params.beta)
    tol = ctx.mpf(params.series_tol) / 10
    total = ctx.mpf(0)
    power = ctx.mpf(1)
    term = ctx.mpf(0)
    for k in range(params.max_terms):
        term = power * ctx.rgamma(alpha * k + beta)
        total += term
        if k >= k_peak and abs(term) < tol:
            return float(total)
        power *= xm
    raise MittagLefflerConvergenceError(
        f"extended precision series for E_{{{params.alpha},{params.beta}}}({x}) did not "
        f"converge within {params.max_terms} terms", float(abs(term)))


def _asymptotic(params: MlParams, r: float) -> float:
    alpha, beta, tol = params.alpha, params.beta, params.series_tol
    total = 0.0
    if alpha > 1.0:
        root = r ** (1.0 / alpha)
        total += (2.0 / alpha) * r ** ((1.0 - beta) / alpha) \
            * math.exp(root * math.cos(math.pi / alpha)) \
            * math.cos(root * math.sin(math.pi / alpha) + math.pi * (1.0 - beta) / alpha)

    previous_envelope = math.inf
    envelope = 0.0
    for k in range(1, params.max_terms):
        term = -((-1.0) ** k) * r ** (-k) * float(rgamma(beta - alpha * k))
        # |1/Gamma(beta - alpha*k)| <= Gamma(1 + alpha*k - beta) / pi by reflection
        shifted = 1.0 + alpha * k - beta
        if shifted > 0.0:
            envelope = math.exp(float(gammaln(shifted)) - k * math.log(r)) / math.pi
        else:
            envelope = abs(term)
        if envelope > previous_envelope:
            break
        total += term
        if envelope < 0.1 * tol:
            return total
        previous_envelope = envelope

    if previous_envelope > 10.0 * tol:
        raise MittagLefflerConvergenceError(
            f"asymptotic expansion of E_{{{alpha},{beta}}}({-r}) stalls", previous_envelope)
    return total


def ml_reference(alpha: float, beta: float, x: float, digits: int = 15) -> float:
    """Extended precision power series of E_{alpha,beta}(x), used as ground truth in tests"""
    if abs(x) > ORACLE_LIMIT:
        raise OracleRangeError(f"|x| = {abs(x)} exceeds the series oracle range {ORACLE_LIMIT}")
    if not 1 <= digits <= ORACLE_MAX_DIGITS:
        raise OracleRangeError(f"digits must lie in [1, {ORACLE_MAX_DIGITS}], got {digits}")

    max_terms = 10000
    if x == 0.0:
        log_peak, k_peak = 0.0, 0
    else:
        log_peak, k_peak = _series_peak(alpha, beta, abs(x), max_terms)
    dps = digits + 10 + max(0, math.ceil(log_peak / _LN10))
    ctx = _mp_context(dps)
    xm = ctx.mpf(x)
    a = ctx.mpf(alpha)
    b = ctx.mpf(beta)
    cutoff = ctx.mpf(10) ** (-(digits + 5))
    total = ctx.mpf(0)
    power = ctx.mpf(1)
    for k in range(max_terms):
        term = power * ctx.rgamma(a * k + b)
        total += term
        if k >= k_peak and abs(term) < cutoff:
            return float(total)
        power *= xm
    raise OracleRangeError(f"series oracle did not converge for x = {x}")
