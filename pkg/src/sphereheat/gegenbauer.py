"""Gegenbauer polynomials evaluated as ratios C_l(w) / C_l(1).

Raw values C_l^alpha(w) leave double range after a handful of degrees once
alpha is in the hundreds, so the three-term recurrence is carried on the
normalised ratio and the scale log C_l^alpha(1) is accumulated separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import gammaln

from .errors import DimensionTooSmall, InvalidArgument, InvalidOrder

L_MAX_CAP = 10**6


@dataclass(frozen=True)
class GegenbauerEval:
    degree: int
    order: float
    ratio: float
    log_value_at_one: float

    @property
    def value(self) -> float:
        return self.ratio * math.exp(self.log_value_at_one)


def _check(alpha: float, w) -> np.ndarray:
    if not alpha > 0:
        raise InvalidOrder(f"order alpha must be > 0, got {alpha}")
    w = np.asarray(w, dtype=float)
    if np.any(np.abs(w) > 1.0) or np.any(np.isnan(w)):
        raise InvalidArgument("Gegenbauer argument must lie in [-1, 1]")
    return w


def log_value_at_one(degree: int, alpha: float) -> float:
    """log C_l^alpha(1) = log Gamma(l + 2 alpha) - log Gamma(2 alpha) - log l!."""
    return float(gammaln(degree + 2 * alpha) - gammaln(2 * alpha) - gammaln(degree + 1))


def iter_ratios(alpha: float, w) -> Iterator[tuple[int, np.ndarray, float]]:
    """Yield ``(l, C_l(w)/C_l(1), log C_l(1))`` for l = 0, 1, 2, ... without end.

    Dividing the standard recurrence
    l C_l = 2 (l + alpha - 1) w C_{l-1} - (l + 2 alpha - 2) C_{l-2}
    through by C_l(1) gives
    r_l = [2 (l + alpha - 1) w r_{l-1} - (l - 1) r_{l-2}] / (l + 2 alpha - 1),
    and C_l(1) / C_{l-1}(1) = (l + 2 alpha - 1) / l.
    """
    w = _check(alpha, w)
    two_alpha = 2.0 * alpha
    # endpoints are pinned so r_l(1) = 1 and r_l(-1) = (-1)^l hold exactly
    at_one = w == 1.0
    at_minus_one = w == -1.0
    pin = bool(np.any(at_one) or np.any(at_minus_one))
    prev = np.ones_like(w)
    yield 0, prev, 0.0
    cur = w.copy()
    log_one = math.log(two_alpha)
    yield 1, cur, log_one
    degree = 1
    while True:
        degree += 1
        nxt = (2.0 * (degree + alpha - 1.0) * w * cur - (degree - 1.0) * prev) / (degree + two_alpha - 1.0)
        if pin:
            nxt = np.where(at_one, 1.0, np.where(at_minus_one, (-1.0) ** degree, nxt))
        log_one += math.log1p((two_alpha - 1.0) / degree)
        prev, cur = cur, nxt
        yield degree, cur, log_one


def normalized_ratios(alpha: float, w, l_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Array form: ratios of shape ``(l_max + 1, *w.shape)`` and the log scales."""
    if l_max < 0:
        raise InvalidArgument(f"l_max must be >= 0, got {l_max}")
    if l_max > L_MAX_CAP:
        raise InvalidArgument(f"l_max {l_max} exceeds the hard cap {L_MAX_CAP}")
    w = np.asarray(w, dtype=float)
    ratios = np.empty((l_max + 1,) + w.shape)
    logs = np.empty(l_max + 1)
    for degree, ratio, log_one in iter_ratios(alpha, w):
        ratios[degree] = ratio
        logs[degree] = log_one
        if degree == l_max:
            break
    return ratios, logs


def eval_normalized_sequence(alpha: float, w: float, l_max: int) -> list[GegenbauerEval]:
    ratios, logs = normalized_ratios(alpha, float(w), l_max)
    return [
        GegenbauerEval(degree=l, order=float(alpha), ratio=float(ratios[l]), log_value_at_one=float(logs[l]))
        for l in range(l_max + 1)
    ]


def gegenbauer(degree: int, alpha: float, w) -> np.ndarray:
    """Unnormalised C_l^alpha(w); only safe while C_l^alpha(1) fits in a double."""
    ratios, logs = normalized_ratios(alpha, w, degree)
    return ratios[degree] * math.exp(logs[degree])


def _log_b(degree, n):
    return gammaln(degree + n - 2) - gammaln(n - 2) - gammaln(degree + 1)


def _log_c(degree, n):
    return gammaln(0.5 * (degree + n - 2)) - gammaln(0.5 * (n - 2)) - gammaln(0.5 * degree + 1)


def log_bound_M(degree, n: int):
    """log of M_l = c + |b - c| bounding |C_l^{(n-2)/2}(w)| on [-1, 1].

    Accepts an integer or an integer array of degrees.
    """
    if n < 3:
        raise DimensionTooSmall(f"n must be >= 3, got {n}")
    degree = np.asarray(degree, dtype=float)
    log_b = _log_b(degree, n)
    log_c = _log_c(degree, n)
    hi = np.maximum(log_b, log_c)
    lo = np.minimum(log_b, log_c)
    # b >= c gives M = b; otherwise M = 2c - b
    with np.errstate(divide="ignore"):
        log_diff = hi + np.log1p(-np.exp(lo - hi))
    two_c_minus_b = np.logaddexp(log_c, np.where(log_c > log_b, log_diff, -np.inf))
    out = np.where(log_b >= log_c, log_b, two_c_minus_b)
    return float(out) if out.ndim == 0 else out


def bound_M(degree: int, n: int) -> float:
    return math.exp(log_bound_M(degree, n))
