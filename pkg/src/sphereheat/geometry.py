"""Maps from feature space onto the unit hypersphere and basic sphere geometry."""

from __future__ import annotations

import enum
import math

import numpy as np
from scipy.special import gammaln

from .errors import (
    DimensionMismatch,
    DimensionTooSmall,
    NegativeEntry,
    NotUnit,
    ZeroVector,
)

UNIT_TOL = 1e-12


class SphereMap(str, enum.Enum):
    SQRT_L1 = "sqrt-l1"
    L2 = "l2"
    NONE = "none"

    @classmethod
    def parse(cls, value: "SphereMap | str | None") -> "SphereMap":
        if value is None:
            return cls.NONE
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected a 1-d feature vector, got shape {x.shape}")
    if x.size < 2:
        raise DimensionTooSmall(f"feature dimension must be >= 2, got {x.size}")
    return x


def sphere_map(x, kind: SphereMap | str = SphereMap.SQRT_L1) -> np.ndarray:
    """Send a feature vector to a point on the unit sphere.

    ``sqrt-l1`` takes square roots of the L1-normalised entries and needs
    nonnegative input; ``l2`` divides by the Euclidean norm; ``none`` checks
    that the input already has unit norm and returns a copy.
    """
    kind = SphereMap.parse(kind)
    x = _as_vector(x)
    if kind is SphereMap.SQRT_L1:
        if np.any(x < 0):
            i = int(np.flatnonzero(x < 0)[0])
            raise NegativeEntry(f"sqrt-l1 map needs nonnegative entries; x[{i}] = {x[i]}")
        total = x.sum()
        if total <= 0:
            raise ZeroVector("sqrt-l1 map needs a vector with positive sum")
        return np.sqrt(x / total)
    norm = np.linalg.norm(x)
    if norm == 0:
        raise ZeroVector("cannot map the zero vector onto the sphere")
    if kind is SphereMap.L2:
        return x / norm
    if abs(norm - 1.0) > UNIT_TOL:
        raise NotUnit(f"input norm {norm!r} is not 1 within {UNIT_TOL}")
    return x.copy()


def sphere_map_rows(X, kind: SphereMap | str = SphereMap.SQRT_L1) -> np.ndarray:
    """Row-wise ``sphere_map`` for an ``(m, n)`` data matrix."""
    kind = SphereMap.parse(kind)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d data matrix, got shape {X.shape}")
    if X.shape[1] < 2:
        raise DimensionTooSmall(f"feature dimension must be >= 2, got {X.shape[1]}")
    if kind is SphereMap.SQRT_L1:
        bad = np.argwhere(X < 0)
        if bad.size:
            i, j = bad[0]
            raise NegativeEntry(f"sqrt-l1 map needs nonnegative entries; row {i}, column {j} = {X[i, j]}")
        totals = X.sum(axis=1)
        zero = np.flatnonzero(totals <= 0)
        if zero.size:
            raise ZeroVector(f"row {zero[0]} has zero sum")
        return np.sqrt(X / totals[:, None])
    norms = np.linalg.norm(X, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ZeroVector(f"row {zero[0]} is the zero vector")
    if kind is SphereMap.L2:
        return X / norms[:, None]
    off = np.flatnonzero(np.abs(norms - 1.0) > UNIT_TOL)
    if off.size:
        raise NotUnit(f"row {off[0]} has norm {norms[off[0]]!r}")
    return X.copy()


def cosine_similarity(x, y) -> float:
    x = _as_vector(x)
    y = _as_vector(y)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes differ: {x.shape} vs {y.shape}")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ZeroVector("cosine similarity is undefined for the zero vector")
    return float(np.clip(np.dot(x, y) / (nx * ny), -1.0, 1.0))


def geodesic_distance(x_hat, y_hat) -> float:
    """Great-arc length between two unit vectors, in ``[0, pi]``."""
    x_hat = np.asarray(x_hat, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if x_hat.shape != y_hat.shape:
        raise DimensionMismatch(f"shapes differ: {x_hat.shape} vs {y_hat.shape}")
    return float(np.arccos(np.clip(np.dot(x_hat, y_hat), -1.0, 1.0)))


def log_surface_area(n: int) -> float:
    """log of the area of the unit sphere S^{n-1} sitting in R^n."""
    if n < 2:
        raise DimensionTooSmall(f"n must be >= 2, got {n}")
    return math.log(2.0) + 0.5 * n * math.log(math.pi) - float(gammaln(0.5 * n))


def surface_area(n: int) -> float:
    """Area 2 pi^{n/2} / Gamma(n/2) of S^{n-1}; underflows to 0 for very large n."""
    return math.exp(log_surface_area(n))
