import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphereheat.errors import InvalidArgument, InvalidParams, TruncationExceeded
from sphereheat.exact import (
    ExactKernelParams,
    TruncationPolicy,
    area_slice,
    g_exact,
    g_exact_truncated,
    k_exact,
    pde_oracle,
    self_similarity_bound_check,
    sweet_spot_time,
    tail_bound,
)
from sphereheat.geometry import log_surface_area

from oracles import legendre_heat_kernel

# G(w; n, t) at 60 digits from an mpmath evaluation of the Gegenbauer series
FROZEN = [
    (3, 0.5, 0.0, 0.069684841999030152332),
    (3, 0.05, 0.9, 0.59535597481450444704),
    (4, 0.3, -0.5, 0.011528708779970644445),
    (10, 0.05, 0.7, 0.94482096554499784009),
    (10, 0.5, -0.2, 0.038335548406993043813),
    (50, 0.05, 0.95, 4146522131777.1821744),
    (50, 0.2, 0.3, 115688455549.97485044),
    (200, 0.0265, 0.99, 2.4248726668193839464e106),
    (200, 0.0265, 0.5, 1.4900172843208937126e106),
]


@pytest.mark.parametrize("n, t, w, expected", FROZEN)
def test_frozen_values(n, t, w, expected):
    assert g_exact(w, ExactKernelParams(n, t)).value == pytest.approx(expected, rel=1e-11)


def test_beyond_double_range():
    # G itself is ~1e883 here; only its log is representable
    res = g_exact(0.999, ExactKernelParams(1000, 0.0069))
    assert res.log_value == pytest.approx(math.log(8.8906619494168726343) + 882 * math.log(10), rel=1e-13)
    assert math.isinf(res.value)


def test_large_t_limit():
    p = ExactKernelParams(3, 10.0)
    assert g_exact(1.0, p).value == pytest.approx(1 / (4 * math.pi), rel=1e-8)
    # two-term truncation 1 - 6e^{-20}/(1 + 3e^{-20}); the deviation from 1 is 1.24e-8
    assert k_exact(-1.0, p) == pytest.approx(1 - 6 * math.exp(-20) / (1 + 3 * math.exp(-20)), abs=1e-15)
    w = np.linspace(-1, 1, 201)
    assert np.max(np.abs(k_exact(w, ExactKernelParams(100, 5.0)) - 1)) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(-1, 1), st.floats(0.01, 3))
def test_legendre_specialisation(w, t):
    assert g_exact(w, ExactKernelParams(3, t)).value == pytest.approx(legendre_heat_kernel(w, t), rel=1e-12)


def test_far_tail_keeps_relative_accuracy():
    # at theta = pi the kernel is ~1e-20 of its peak; plain doubles get the sign wrong
    w = np.cos(np.linspace(2.5, math.pi, 20))
    g = g_exact(w, ExactKernelParams(3, 0.05)).value
    ref = np.array([legendre_heat_kernel(float(x), 0.05) for x in w])
    assert np.all(g > 0)
    # the double-precision reference itself is only good to ~1e-16 absolute
    np.testing.assert_allclose(g[ref > 1e-12], ref[ref > 1e-12], rtol=1e-9)
    assert g[-1] == pytest.approx(1.4856447402806293e-20, rel=1e-10)


def test_vectorised_matches_scalar():
    p = ExactKernelParams(7, 0.2)
    w = np.linspace(-1, 1, 11)
    vec = g_exact(w, p).value
    assert vec.shape == w.shape
    for x, v in zip(w, vec):
        assert g_exact(float(x), p).value == pytest.approx(v, rel=1e-13)


@pytest.mark.parametrize("n, t", [(3, 0.1), (10, 0.05), (50, 0.02)])
def test_tail_bound_is_honest(n, t):
    w = np.linspace(-1, 1, 33)
    peak = g_exact(1.0, ExactKernelParams(n, t)).value
    for l_star in (5, 10, 20):
        gap = np.abs(g_exact_truncated(w, n, t, l_star) - g_exact_truncated(w, n, t, 4 * l_star))
        # the bound is attained at w = 1, so allow for rounding in the two sums
        assert np.all(gap <= tail_bound(l_star, n, t) + 1e-14 * peak)


@pytest.mark.parametrize("n", [3, 10, 100])
@pytest.mark.parametrize("t_star", [0.5, 1.0, 2.0])
def test_k_exact_monotone_and_bounded(n, t_star):
    theta = np.linspace(0, math.pi, 256)
    k = k_exact(np.cos(theta), ExactKernelParams(n, sweet_spot_time(n, t_star)))
    assert k[0] == 1.0
    assert np.all((k >= 0) & (k <= 1))
    assert np.all(np.diff(k) <= 1e-15)


def test_sweet_spot_and_self_similarity():
    assert sweet_spot_time(3) == pytest.approx(math.log(3) / 3)
    assert sweet_spot_time(100) == pytest.approx(0.04605, abs=1e-5)
    with pytest.raises(InvalidParams):
        sweet_spot_time(2)
    big = self_similarity_bound_check(1000)
    assert 1 <= big["lhs"] <= math.e * 1.1
    assert big["rhs"] == pytest.approx(math.e)
    assert self_similarity_bound_check(100)["lhs"] <= 1.5 * math.e
    assert self_similarity_bound_check(10, t=50.0)["lhs"] == pytest.approx(1.0, abs=1e-12)


def test_params_validation():
    with pytest.raises(InvalidParams):
        ExactKernelParams(2, 0.1)
    with pytest.raises(InvalidParams):
        ExactKernelParams(5, 0.0)
    with pytest.raises(InvalidParams):
        TruncationPolicy(rel_tol=0)
    with pytest.raises(InvalidArgument):
        g_exact(1.5, ExactKernelParams(3, 0.1))
    tight = ExactKernelParams(3, 1e-4, TruncationPolicy(l_max=50))
    with pytest.raises(TruncationExceeded):
        g_exact(0.3, tight)


def test_pde_oracle_basics():
    sol = pde_oracle(3, 0.5)
    assert sol.total_heat == pytest.approx(1.0, abs=1e-10)
    assert np.all(sol.values > 0)
    assert sol(math.pi / 2) == pytest.approx(g_exact(0.0, ExactKernelParams(3, 0.5)).value, rel=1e-4)
    theta = np.linspace(0.05, 3.1, 64)
    ref = g_exact(np.cos(theta), ExactKernelParams(3, 0.5)).value
    np.testing.assert_allclose(sol(theta), ref, rtol=1e-4)


def test_pde_oracle_switches_to_positive_method():
    # the profile spans ~20 decades, beyond what the eigen expansion resolves
    assert pde_oracle(3, 0.05).log_interp
    assert not pde_oracle(3, 0.5).log_interp
    positive = pde_oracle(3, 0.5, method="positive")
    assert positive.total_heat == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(InvalidArgument):
        pde_oracle(3, 0.5, method="magic")


def test_area_slice():
    assert area_slice(3) == pytest.approx(2 * math.pi)
    assert math.log(area_slice(10)) == pytest.approx(log_surface_area(9))


def test_tail_floor_trades_tail_accuracy_for_speed():
    w = np.cos(np.linspace(0, math.pi, 64))
    exact = g_exact(w, ExactKernelParams(3, 0.05)).value
    bulk = g_exact(w, ExactKernelParams(3, 0.05, TruncationPolicy(tail_floor=1e-14))).value
    peak = exact[0]
    assert np.max(np.abs(bulk - exact)) <= 1e-13 * peak
    with pytest.raises(InvalidParams):
        TruncationPolicy(tail_floor=1.0)
