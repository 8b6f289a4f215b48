"""Parametrix kernel on the sphere and its short-time correction terms.

The SVM-facing kernel is the bare Gaussian factor exp(-theta^2 / 4t); the
correction terms u0, u1, u2 multiply it in the short-time expansion on the
d-sphere (d = n - 1). ``u_recursion_oracle`` rebuilds u_{k+1} numerically from
u_k so the closed forms can be checked independently.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import bernoulli

from .errors import InvalidArgument, OutOfDomain, QuadratureFailure

_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 14
# coefficients of r cot r = sum_k c_k r^{2k}
_COT_COEFFS = np.array(
    [(-1) ** k * 2 ** (2 * k) * float(bernoulli(2 * k)[2 * k]) / math.factorial(2 * k) for k in range(_SERIES_TERMS)]
)


@dataclass(frozen=True)
class ParametrixParams:
    n: int
    t: float
    order: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise InvalidArgument(f"n must be >= 2, got {self.n}")
        if not self.t > 0:
            raise InvalidArgument(f"t must be > 0, got {self.t}")
        if self.order not in (0, 1, 2):
            raise InvalidArgument(f"order must be 0, 1 or 2, got {self.order}")

    @property
    def d(self) -> int:
        return self.n - 1


def k_prx(theta, t: float):
    """exp(-theta^2 / 4t), without the (4 pi t)^{-(n-1)/2} prefactor."""
    theta = np.asarray(theta, dtype=float)
    if not t > 0:
        raise InvalidArgument(f"t must be > 0, got {t}")
    if np.any(theta < 0) or np.any(theta > math.pi):
        raise InvalidArgument("theta must lie in [0, pi]")
    out = np.exp(-theta * theta / (4.0 * t))
    return float(out) if out.ndim == 0 else out


def _sinc(r):
    r = np.asarray(r, dtype=float)
    return np.sinc(r / math.pi)


def u0(r, d: int):
    """(sin r / r)^{-(d-1)/2}, normalised so u0(0) = 1; diverges at r = pi."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r >= math.pi):
        raise OutOfDomain("u0 is defined on [0, pi)")
    out = _sinc(r) ** (-(d - 1) / 2.0)
    return float(out) if out.ndim == 0 else out


def _r_cot_r(r: np.ndarray) -> np.ndarray:
    return r / np.tan(r)


def _u1_bracket_over_r2(r: np.ndarray, d: int) -> np.ndarray:
    """[3 - d + (d-1) r^2 + (d-3) r cot r] / r^2, cancellation-free near r = 0."""
    out = np.empty_like(r)
    small = r < _SERIES_CUTOFF
    if np.any(small):
        rs2 = r[small] ** 2
        # (r cot r - 1 + r^2/3) / r^2 = sum_{k>=2} c_k r^{2k-2}
        tail_over_r2 = np.polynomial.polynomial.polyval(rs2, _COT_COEFFS[2:]) * rs2
        out[small] = 2.0 * d / 3.0 + (d - 3) * tail_over_r2
    big = ~small
    if np.any(big):
        rb = r[big]
        out[big] = (3 - d + (d - 1) * rb**2 + (d - 3) * _r_cot_r(rb)) / rb**2
    return out


def u1(r, d: int):
    """First correction u0 (d-1)/(4 r^2) [3 - d + (d-1) r^2 + (d-3) r cot r].

    Near r = 0 the bracket is a 0/0 form; below r = 0.5 it is evaluated from
    the Taylor series of r cot r, which tends to d(d-1)/6 u0 at the origin.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r >= math.pi):
        raise OutOfDomain("u1 is defined on [0, pi)")
    out = u0(r, d) * (d - 1) / 4.0 * _u1_bracket_over_r2(np.atleast_1d(r), d).reshape(r.shape)
    return float(out) if np.ndim(out) == 0 else out


def u2(r, d: int):
    """Second correction exactly as the closed form is printed.

    u0 (d-1)/32 [(d-3)^3 + (d-3)(d-5)(d-7)/r^4 - (d-3)^2 (d-5)/(r^3 tan r)
                 + 2 (d-1)^2 (d-3)/(r tan r) + (d+1)(d-3)(d-5)/(r^2 sin r)]

    Every bracket term carries (d-3), so this vanishes identically at d = 3;
    ``u_recursion_oracle`` gives u0/2 there instead. Left as printed on purpose.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(r >= math.pi):
        raise OutOfDomain("u2 is defined on (0, pi)")
    tan_r = np.tan(r)
    bracket = (
        (d - 3) ** 3
        + (d - 3) * (d - 5) * (d - 7) / r**4
        - (d - 3) ** 2 * (d - 5) / (r**3 * tan_r)
        + 2 * (d - 1) ** 2 * (d - 3) / (r * tan_r)
        + (d + 1) * (d - 3) * (d - 5) / (r**2 * np.sin(r))
    )
    out = u0(r, d) * (d - 1) / 32.0 * bracket
    return float(out) if np.ndim(out) == 0 else out


def g_prx(theta, params: ParametrixParams):
    """Gaussian factor times u0 + u1 t + u2 t^2 truncated at ``params.order``."""
    theta = np.asarray(theta, dtype=float)
    d, t = params.d, params.t
    series = u0(theta, d)
    if params.order >= 1:
        series = series + u1(theta, d) * t
    if params.order >= 2:
        series = series + u2(theta, d) * t * t
    return k_prx(theta, t) * series


def _laplacian(f, r: float, d: int, h: float) -> float:
    """f'' + (d-1) cot(r) f' from sixth-order central differences.

    ``f`` must be even in r so that stencils reaching past 0 stay valid.
    """
    offsets = np.arange(-3, 4) * h
    vals = np.asarray([f(abs(r + o)) for o in offsets], dtype=float)
    d1 = np.dot([-1, 9, -45, 0, 45, -9, 1], vals) / (60.0 * h)
    d2 = np.dot([2, -27, 270, -490, 270, -27, 2], vals) / (180.0 * h * h)
    return d2 + (d - 1) * d1 / math.tan(r)


def u_recursion_oracle(k: int, r_grid, d: int, u_k=None, h: float = 2e-3, rtol: float = 1e-10) -> np.ndarray:
    """u_{k+1}(r) = r^{-(k+1)} u0(r) int_0^r s^k u0(s)^{-1} (Lap u_k)(s) ds, tabulated on ``r_grid``.

    ``u_k`` defaults to the closed form (u0 for k = 0, u1 for k = 1). The
    Laplacian is applied by finite differences and the integral by adaptive
    Gauss-Kronrod, so nothing here reuses the closed-form algebra beyond u_k.
    """
    if k < 0:
        raise InvalidArgument("k must be >= 0")
    if u_k is None:
        if k == 0:
            u_k = lambda s: float(u0(s, d))  # noqa: E731
        elif k == 1:
            u_k = lambda s: float(u1(s, d))  # noqa: E731
        else:
            raise InvalidArgument("pass u_k explicitly for k >= 2")

    def integrand(s):
        return s**k / float(u0(s, d)) * _laplacian(u_k, s, d, h)

    out = []
    for r in np.asarray(r_grid, dtype=float):
        if not 0 < r < math.pi - 4 * h:
            raise OutOfDomain(f"oracle radius {r} outside (0, pi)")
        with warnings.catch_warnings():
            # quad's roundoff warnings are judged by the returned error estimate instead
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            value, err = integrate.quad(integrand, 0.0, r, epsabs=1e-13, epsrel=rtol, limit=100)
        if not math.isfinite(value) or err > 1e-6 * max(1.0, abs(value)):
            raise QuadratureFailure(f"quadrature at r={r} reported error {err}")
        out.append(r ** (-(k + 1)) * float(u0(r, d)) * value)
    return np.asarray(out)


def unphysical_regime(n: int, t: float) -> bool:
    """True when (n - 2) t > 3: the order-0 product rises away from theta = 0."""
    if n < 3:
        raise InvalidArgument(f"n must be >= 3, got {n}")
    if not t > 0:
        raise InvalidArgument(f"t must be > 0, got {t}")
    return (n - 2) * t > 3


def order0_slope(n: int, t: float, theta: float = 0.01, h: float = 1e-5) -> float:
    """Central-difference slope of exp(-theta^2/4t) u0(theta) with d = n - 1."""
    d = n - 1

    def f(x):
        return math.exp(-x * x / (4 * t)) * float(u0(x, d))

    return (f(theta + h) - f(theta - h)) / (2 * h)


def u2_discrepancy_report(d: int, r_grid, stated=None) -> dict:
    """Compare the printed u2 with the recursion oracle on ``r_grid``.

    ``stated`` optionally gives a claimed closed form (a callable of r) to
    test against the oracle as well, e.g. u0/2 at d = 3.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    printed = np.asarray(u2(r_grid, d))
    oracle = u_recursion_oracle(1, r_grid, d)
    scale = np.maximum(np.abs(oracle), 1e-300)
    report = {
        "d": d,
        "max_abs_printed": float(np.max(np.abs(printed))),
        "max_rel_printed_vs_oracle": float(np.max(np.abs(printed - oracle) / scale)),
        "printed_matches_oracle": bool(np.allclose(printed, oracle, rtol=1e-6, atol=1e-9)),
    }
    if stated is not None:
        claim = np.asarray([stated(r) for r in r_grid], dtype=float)
        report["max_rel_stated_vs_oracle"] = float(np.max(np.abs(claim - oracle) / scale))
        report["stated_matches_oracle"] = bool(np.allclose(claim, oracle, rtol=1e-6, atol=1e-9))
    report["discrepancy"] = not report["printed_matches_oracle"]
    return report
