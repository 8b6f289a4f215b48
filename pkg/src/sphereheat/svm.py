"""Soft-margin kernel SVM via SMO, one-vs-one multiclass, and VC-bound estimates.

The dual is

    max  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij
    s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0

and is solved by SMO with the maximal-violating-pair working set, carrying the
gradient G = Q a - 1 (Q_ij = y_i y_j K_ij) incrementally.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyClass, InvalidArgument, InvalidParams, NoConvergence
from .kernels import GramMatrix, KernelSpec

SCHEMA_VERSION = 1
_CURVATURE_FLOOR = 1e-12


@dataclass
class SvmProblem:
    K: GramMatrix | np.ndarray
    labels: np.ndarray
    C: float = 1.0
    tol: float = 1e-3
    max_passes: int = 1000
    seed: int = 0

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=float)
        m = self.entries.shape[0]
        if self.entries.shape != (m, m):
            raise DimensionMismatch(f"Gram matrix must be square, got {self.entries.shape}")
        if self.labels.shape != (m,):
            raise DimensionMismatch(f"expected {m} labels, got {self.labels.shape}")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise InvalidParams("binary labels must be -1 or +1")
        if not (np.any(self.labels > 0) and np.any(self.labels < 0)):
            raise EmptyClass("both classes must be present")
        if not self.C > 0:
            raise InvalidParams(f"C must be > 0, got {self.C}")
        if not self.tol > 0:
            raise InvalidParams(f"tol must be > 0, got {self.tol}")

    @property
    def entries(self) -> np.ndarray:
        return self.K.entries if isinstance(self.K, GramMatrix) else np.asarray(self.K, dtype=float)

    @property
    def spec(self) -> KernelSpec | None:
        return self.K.spec if isinstance(self.K, GramMatrix) else None

    @property
    def sample_ids(self) -> list[str]:
        if isinstance(self.K, GramMatrix):
            return list(self.K.sample_ids)
        return [str(i) for i in range(self.labels.size)]


@dataclass
class SvmModel:
    dual_coeffs: np.ndarray  # alpha_i y_i
    bias: float
    C: float
    w_norm_sq: float
    spec: KernelSpec | None = None
    sample_ids: list[str] = field(default_factory=list)
    converged: bool = True
    iterations: int = 0

    @property
    def alpha(self) -> np.ndarray:
        return np.abs(self.dual_coeffs)

    @property
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.dual_coeffs != 0)

    @property
    def margin(self) -> float:
        return 1.0 / math.sqrt(self.w_norm_sq) if self.w_norm_sq > 0 else math.inf

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "dual_coeffs": self.dual_coeffs.tolist(),
            "bias": self.bias,
            "C": self.C,
            "w_norm_sq": self.w_norm_sq,
            "spec": None if self.spec is None else self.spec.to_dict(),
            "sample_ids": list(self.sample_ids),
            "converged": self.converged,
            "iterations": self.iterations,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "SvmModel":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise InvalidParams(f"unsupported model schema_version {data.get('schema_version')!r}")
        spec = data.get("spec")
        return cls(
            dual_coeffs=np.asarray(data["dual_coeffs"], dtype=float),
            bias=float(data["bias"]),
            C=float(data["C"]),
            w_norm_sq=float(data["w_norm_sq"]),
            spec=None if spec is None else KernelSpec.from_dict(spec),
            sample_ids=list(data.get("sample_ids", [])),
            converged=bool(data.get("converged", True)),
            iterations=int(data.get("iterations", 0)),
        )


def dual_objective(alpha, labels, K) -> float:
    alpha = np.asarray(alpha, dtype=float)
    ya = alpha * np.asarray(labels, dtype=float)
    return float(alpha.sum() - 0.5 * ya @ np.asarray(K) @ ya)


def _pick(values: np.ndarray, mask: np.ndarray, rank: np.ndarray, largest: bool) -> int:
    """Index of the extreme of ``values`` over ``mask``; ties go to the lowest seeded rank."""
    idx = np.flatnonzero(mask)
    v = values[idx]
    best = v.max() if largest else v.min()
    ties = idx[v == best]
    if ties.size == 1:
        return int(ties[0])
    return int(ties[np.argmin(rank[ties])])


def train(problem: SvmProblem) -> SvmModel:
    """Solve the binary dual with SMO.

    If the iteration budget ``max_passes * m`` runs out, the current iterate is
    returned with ``converged=False`` and a ``NoConvergence`` warning.
    """
    K = problem.entries
    y = problem.labels
    C = float(problem.C)
    m = y.size
    rank = np.random.default_rng(problem.seed).permutation(m)
    diag = np.diag(K).copy()

    alpha = np.zeros(m)
    grad = -np.ones(m)
    budget = max(1, problem.max_passes) * m
    converged = False
    it = 0
    while it < budget:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        score = -y * grad
        i = _pick(score, up, rank, largest=True)
        j = _pick(score, low, rank, largest=False)
        gap = score[i] - score[j]
        if gap < problem.tol:
            converged = True
            break
        curvature = max(diag[i] + diag[j] - 2.0 * K[i, j], _CURVATURE_FLOOR)
        delta = gap / curvature
        room_i = C - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else C - alpha[j]
        delta = min(delta, room_i, room_j)
        alpha[i] += y[i] * delta
        alpha[j] -= y[j] * delta
        # snap onto the box so bound tests stay exact
        if delta == room_i:
            alpha[i] = C if y[i] > 0 else 0.0
        if delta == room_j:
            alpha[j] = 0.0 if y[j] > 0 else C
        alpha[i] = min(max(alpha[i], 0.0), C)
        alpha[j] = min(max(alpha[j], 0.0), C)
        grad += delta * y * (K[:, i] - K[:, j])
        it += 1

    if not converged:
        warnings.warn(f"SMO stopped after {it} iterations without meeting tol={problem.tol}", NoConvergence, stacklevel=2)

    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(np.mean(-y[free] * grad[free]))
    else:
        score = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = score[up].max() if up.any() else score[low].min()
        lo = score[low].min() if low.any() else hi
        bias = 0.5 * float(hi + lo)
    coeffs = alpha * y
    w_norm_sq = float(coeffs @ K @ coeffs)
    return SvmModel(
        dual_coeffs=coeffs,
        bias=bias,
        C=C,
        w_norm_sq=w_norm_sq,
        spec=problem.spec,
        sample_ids=problem.sample_ids,
        converged=converged,
        iterations=it,
    )


def predict(model: SvmModel, K_test_row) -> np.ndarray | float:
    """Decision value sum_i coeff_i K(x_i, x) + b for one row or a block of rows."""
    rows = np.asarray(K_test_row, dtype=float)
    if rows.shape[-1] != model.dual_coeffs.size:
        raise DimensionMismatch(f"kernel row has length {rows.shape[-1]}, model was trained on {model.dual_coeffs.size}")
    out = rows @ model.dual_coeffs + model.bias
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class PairwiseModel:
    positive: object
    negative: object
    indices: np.ndarray
    model: SvmModel


@dataclass
class MulticlassModel:
    classes: list
    pairs: list[PairwiseModel]

    def decision_votes(self, K_rows) -> tuple[np.ndarray, np.ndarray]:
        rows = np.atleast_2d(np.asarray(K_rows, dtype=float))
        k = len(self.classes)
        votes = np.zeros((rows.shape[0], k))
        strength = np.zeros((rows.shape[0], k))
        pos = {c: i for i, c in enumerate(self.classes)}
        for pair in self.pairs:
            dec = predict(pair.model, rows[:, pair.indices])
            a, b = pos[pair.positive], pos[pair.negative]
            win_a = dec > 0
            votes[:, a] += win_a
            votes[:, b] += ~win_a
            strength[:, a] += np.where(win_a, np.abs(dec), 0.0)
            strength[:, b] += np.where(win_a, 0.0, np.abs(dec))
        return votes, strength


def train_multiclass(K, labels, C: float = 1.0, classes=None, tol: float = 1e-3, max_passes: int = 1000, seed: int = 0) -> MulticlassModel:
    """One-vs-one training: one binary SVM per unordered class pair."""
    entries = K.entries if isinstance(K, GramMatrix) else np.asarray(K, dtype=float)
    labels = np.asarray(labels)
    present = sorted(set(labels.tolist()))
    classes = present if classes is None else list(classes)
    for c in classes:
        if not np.any(labels == c):
            raise EmptyClass(f"class {c!r} has no samples")
    if len(classes) < 2:
        raise EmptyClass(f"need at least 2 classes, got {len(classes)}")
    spec = K.spec if isinstance(K, GramMatrix) else None
    ids = K.sample_ids if isinstance(K, GramMatrix) else [str(i) for i in range(labels.size)]
    pairs = []
    for a, b in itertools.combinations(classes, 2):
        idx = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[idx] == a, 1.0, -1.0)
        sub = GramMatrix(entries[np.ix_(idx, idx)], spec, [ids[i] for i in idx]) if spec is not None else entries[np.ix_(idx, idx)]
        model = train(SvmProblem(sub, y, C=C, tol=tol, max_passes=max_passes, seed=seed))
        pairs.append(PairwiseModel(positive=a, negative=b, indices=idx, model=model))
    return MulticlassModel(classes=classes, pairs=pairs)


def predict_multiclass(model: MulticlassModel, K_rows) -> np.ndarray:
    """Majority vote; ties go to the class with the larger summed winning |decision|."""
    votes, strength = model.decision_votes(K_rows)
    # lexicographic on (votes, strength); first class wins any remaining tie
    top = votes == votes.max(axis=1, keepdims=True)
    masked = np.where(top, strength, -np.inf)
    winners = np.argmax(masked, axis=1)
    return np.asarray(model.classes, dtype=object)[winners]


# --- capacity estimates ---------------------------------------------------


@dataclass(frozen=True)
class VcEstimate:
    R_sq: float
    M_sq: float
    mu_vc_star: float
    m_tilde: float
    n: int

    def to_dict(self) -> dict:
        return {"R_sq": self.R_sq, "M_sq": self.M_sq, "mu_vc_star": self.mu_vc_star, "m_tilde": self.m_tilde, "n": self.n}


def enclosing_ball_radius_sq(K, eps: float = 1e-3, max_iter: int = 100_000) -> float:
    """Squared radius of a (1 + eps)-approximate minimum enclosing ball in feature space.

    Frank-Wolfe on the dual max_u sum_i u_i K_ii - u^T K u over the simplex,
    with the away-free Yildirim step; distances come from Gram entries only.
    The returned value is the largest squared distance to the final centre,
    an upper bound on the true radius squared, further capped by the ball about
    the origin (max_i K_ii).
    """
    K = K.entries if isinstance(K, GramMatrix) else np.asarray(K, dtype=float)
    m = K.shape[0]
    diag = np.diag(K)
    a = int(np.argmax(diag - 2 * K[:, 0] + K[0, 0]))
    b = int(np.argmax(diag - 2 * K[:, a] + K[a, a]))
    u = np.zeros(m)
    u[a] += 0.5
    u[b] += 0.5
    Ku = K @ u
    for _ in range(max_iter):
        uKu = float(u @ Ku)
        dist = np.maximum(diag - 2 * Ku + uKu, 0.0)
        phi = float(u @ diag) - uKu
        j = int(np.argmax(dist))
        if phi <= 0:
            break
        excess = dist[j] / phi - 1.0
        if excess <= (1 + eps) ** 2 - 1:
            break
        step = excess / (2 * (1 + excess))
        u *= 1 - step
        u[j] += step
        Ku = (1 - step) * Ku + step * K[:, j]
    uKu = float(u @ Ku)
    dist = np.maximum(diag - 2 * Ku + uKu, 0.0)
    return float(min(dist.max(), max(diag.max(), 0.0)))


def vc_estimate(model: SvmModel, K, n: int, eps: float = 1e-3) -> VcEstimate:
    """mu*_VC = min(n, R^2 / M^2) + 1 and the effective sample size m / mu*_VC."""
    if n < 1:
        raise InvalidArgument(f"feature dimension must be >= 1, got {n}")
    R_sq = enclosing_ball_radius_sq(K, eps=eps)
    entries = K.entries if isinstance(K, GramMatrix) else np.asarray(K)
    m = entries.shape[0]
    M_sq = 1.0 / model.w_norm_sq if model.w_norm_sq > 0 else math.inf
    ratio = R_sq * model.w_norm_sq
    mu = min(float(n), ratio) + 1.0
    return VcEstimate(R_sq=R_sq, M_sq=M_sq, mu_vc_star=mu, m_tilde=m / mu, n=int(n))


def vc_estimate_multiclass(model: MulticlassModel, K, n: int, eps: float = 1e-3) -> list[VcEstimate]:
    entries = K.entries if isinstance(K, GramMatrix) else np.asarray(K, dtype=float)
    return [vc_estimate(p.model, entries[np.ix_(p.indices, p.indices)], n, eps=eps) for p in model.pairs]


def generalization_bound(m_tilde: float, mu_vc: float, eta: float) -> float:
    """F = sqrt((1/m~) [log(2 m~) + 1 - log(eta/4) / mu_VC])."""
    if not m_tilde > 0:
        raise InvalidArgument(f"m_tilde must be > 0, got {m_tilde}")
    if not mu_vc >= 1:
        raise InvalidArgument(f"mu_vc must be >= 1, got {mu_vc}")
    if not 0 < eta < 1:
        raise InvalidArgument(f"eta must lie in (0, 1), got {eta}")
    inner = (math.log(2 * m_tilde) + 1 - math.log(eta / 4) / mu_vc) / m_tilde
    if inner < 0:
        raise InvalidArgument(f"bound is undefined at m_tilde={m_tilde} (negative radicand)")
    return math.sqrt(inner)


def critical_effective_size(mu_vc: float, eta: float) -> float:
    """Stationary point 1/2 (eta/4)^{1/mu_VC} of ``generalization_bound`` in m~."""
    if not mu_vc >= 1 or not 0 < eta < 1:
        raise InvalidArgument("need mu_vc >= 1 and eta in (0, 1)")
    return 0.5 * (eta / 4) ** (1.0 / mu_vc)
