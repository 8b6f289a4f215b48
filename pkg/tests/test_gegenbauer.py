import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphereheat.errors import DimensionTooSmall, InvalidArgument, InvalidOrder
from sphereheat.gegenbauer import (
    L_MAX_CAP,
    bound_M,
    eval_normalized_sequence,
    gegenbauer,
    log_bound_M,
    log_value_at_one,
    normalized_ratios,
)

# 30-digit values of C_l^alpha(w) from mpmath
FROZEN = [
    (5, 0.5, 0.3, 0.34538625),
    (7, 2.5, -0.4, -6.090216),
    (10, 1.0, 0.77, 1.5214419861849921816),
    (20, 49.0, 0.1, 13059014585.808211181),
]


@pytest.mark.parametrize("degree, alpha, w, expected", FROZEN)
def test_frozen_values(degree, alpha, w, expected):
    assert gegenbauer(degree, alpha, w) == pytest.approx(expected, rel=1e-12)


def test_low_degree_cases():
    seq = eval_normalized_sequence(2.0, 0.5, 2)
    assert seq[0].ratio == 1.0
    # C_1^alpha(w) = 2 alpha w and C_1^alpha(1) = 2 alpha
    assert seq[1].value == pytest.approx(2.0)
    assert seq[1].ratio == pytest.approx(0.5)
    seq = eval_normalized_sequence(1.0, 1.0, 2)
    assert seq[2].ratio == 1.0
    assert seq[2].log_value_at_one == pytest.approx(math.log(3))
    assert log_value_at_one(2, 1.0) == pytest.approx(math.log(3))


def mp_gegenbauer(degree, alpha, w):
    """Plain three-term recurrence l C_l = 2(l+a-1) w C_{l-1} - (l+2a-2) C_{l-2} at 50 digits."""
    with mpmath.workdps(50):
        a, x = mpmath.mpf(alpha), mpmath.mpf(w)
        prev, cur = mpmath.mpf(1), 2 * a * x
        if degree == 0:
            return 1.0
        for l in range(2, degree + 1):
            prev, cur = cur, (2 * (l + a - 1) * x * cur - (l + 2 * a - 2) * prev) / l
        return float(cur)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 20), st.floats(-1, 1), st.integers(0, 50))
def test_matches_unnormalised_recurrence(alpha, w, degree):
    expected = mp_gegenbauer(degree, alpha, w)
    got = gegenbauer(degree, alpha, w)
    # absolute slack near roots, relative elsewhere
    scale = math.exp(log_value_at_one(degree, alpha))
    assert abs(got - float(expected)) <= 1e-10 * max(abs(expected), 1e-6 * scale)


@pytest.mark.parametrize("n", [3, 10, 100])
def test_bound_M_dominates(n):
    alpha = (n - 2) / 2
    w = np.linspace(-1, 1, 401)
    ratios, logs = normalized_ratios(alpha, w, 100)
    for degree in range(101):
        log_abs = np.log(np.maximum(np.abs(ratios[degree]), 1e-300)) + logs[degree]
        assert np.all(log_abs <= log_bound_M(degree, n) + 1e-10)


def test_bound_M_examples():
    assert bound_M(0, 5) == pytest.approx(1.0)
    assert bound_M(1, 4) == pytest.approx(2.0)
    # M_l ~ l^{n-3}/(n-3)!
    l, n = 10**4, 5
    assert bound_M(l, n) / (l ** (n - 3) / math.factorial(n - 3)) == pytest.approx(1, rel=0.05)
    with pytest.raises(DimensionTooSmall):
        bound_M(3, 2)


def test_parity_at_minus_one():
    ratios, _ = normalized_ratios(3.5, -1.0, 60)
    np.testing.assert_array_equal(ratios, (-1.0) ** np.arange(61))


def test_no_overflow_for_large_order():
    ratios, logs = normalized_ratios(199.0, 0.3, 1000)
    assert np.all(np.isfinite(ratios)) and np.all(np.isfinite(logs))
    assert logs[-1] > 709  # C_l(1) itself is beyond double range


def test_errors():
    with pytest.raises(InvalidOrder):
        gegenbauer(2, 0.0, 0.5)
    with pytest.raises(InvalidArgument):
        gegenbauer(2, 1.0, 1.5)
    with pytest.raises(InvalidArgument):
        normalized_ratios(1.0, 0.5, L_MAX_CAP + 1)
