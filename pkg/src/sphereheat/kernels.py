"""The five SVM kernels behind one interface, and Gram-matrix construction."""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidParams, MatrixTooLarge, SphereHeatError, UsageError
from .exact import BULK_TRUNCATION, ExactKernelParams, TruncationPolicy, k_exact
from .geometry import SphereMap, sphere_map, sphere_map_rows
from .parametrix import k_prx

PSD_RTOL = 1e-8
PSD_MAX_SIZE = 2000
_W_QUANTUM = 1e-12


class KernelKind(str, enum.Enum):
    LINEAR = "lin"
    RBF = "rbf"
    COSINE = "cos"
    PARAMETRIX = "prx"
    EXACT = "ext"

    @property
    def spherical(self) -> bool:
        return self in (KernelKind.COSINE, KernelKind.PARAMETRIX, KernelKind.EXACT)

    @property
    def mercer(self) -> bool:
        return self is not KernelKind.PARAMETRIX


@dataclass(frozen=True)
class KernelSpec:
    """One kernel with its hyperparameters.

    Spherical kinds (cos, prx, ext) need a sphere map; lin and rbf must not
    have one. ``n`` for the exact kernel is the ambient feature dimension and
    may be left as ``None`` to be taken from the data.
    """

    kind: KernelKind
    map: SphereMap = SphereMap.NONE
    gamma: float | None = None
    t: float | None = None
    n: int | None = None
    truncation: TruncationPolicy = BULK_TRUNCATION

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        object.__setattr__(self, "map", SphereMap.parse(self.map))
        if self.kind.spherical and self.map is SphereMap.NONE:
            raise UsageError(f"kernel {self.kind.value} needs a sphere map (sqrt-l1 or l2)")
        if not self.kind.spherical and self.map is not SphereMap.NONE:
            raise UsageError(f"kernel {self.kind.value} is Euclidean and takes no sphere map")
        if self.kind is KernelKind.RBF and not (self.gamma is not None and self.gamma > 0):
            raise InvalidParams("rbf kernel needs gamma > 0")
        if self.kind in (KernelKind.PARAMETRIX, KernelKind.EXACT) and not (self.t is not None and self.t > 0):
            raise InvalidParams(f"{self.kind.value} kernel needs t > 0")
        if self.kind is KernelKind.EXACT and self.n is not None and self.n < 3:
            raise InvalidParams("exact kernel needs n >= 3")

    def with_dimension(self, n: int) -> "KernelSpec":
        if self.kind is KernelKind.EXACT and self.n is None:
            return replace(self, n=n)
        return self

    def exact_params(self) -> ExactKernelParams:
        if self.n is None:
            raise InvalidParams("exact kernel dimension not resolved; call with_dimension first")
        return ExactKernelParams(n=self.n, t=self.t, truncation=self.truncation)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "map": self.map.value}
        for key in ("gamma", "t", "n"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.kind is KernelKind.EXACT:
            out["truncation"] = {
                "rel_tol": self.truncation.rel_tol,
                "consecutive_small": self.truncation.consecutive_small,
                "l_min": self.truncation.l_min,
                "l_max": self.truncation.l_max,
                "tail_floor": self.truncation.tail_floor,
            }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "KernelSpec":
        data = dict(data)
        trunc = data.pop("truncation", None)
        if trunc is not None:
            data["truncation"] = TruncationPolicy(**trunc)
        return cls(**data)


@dataclass
class GramMatrix:
    entries: np.ndarray
    spec: KernelSpec
    sample_ids: list[str]

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def sub(self, rows, cols=None) -> np.ndarray:
        cols = rows if cols is None else cols
        return self.entries[np.ix_(rows, cols)]


def _kernel_of_w(spec: KernelSpec, w: np.ndarray, threads: int = 1) -> np.ndarray:
    """Apply a spherical kernel to dot products of unit vectors."""
    w = np.clip(w, -1.0, 1.0)
    if spec.kind is KernelKind.COSINE:
        return w
    if spec.kind is KernelKind.PARAMETRIX:
        return k_prx(np.arccos(w), spec.t)
    params = spec.exact_params()
    # count data repeat dot products a lot; evaluate each quantised value once
    keys = np.round(w / _W_QUANTUM).astype(np.int64)
    uniq, inverse = np.unique(keys, return_inverse=True)
    w_uniq = np.clip(uniq * _W_QUANTUM, -1.0, 1.0)
    # snap back exact endpoints so k(1) = 1 is hit exactly
    w_uniq[uniq == int(round(1 / _W_QUANTUM))] = 1.0
    chunks = np.array_split(w_uniq, max(1, min(threads, w_uniq.size // 512 + 1)))

    def run(chunk):
        try:
            return np.atleast_1d(k_exact(chunk, params)), None
        except SphereHeatError as exc:
            # locate the first failing value so the caller can name the pair
            for value in chunk:
                try:
                    k_exact(float(value), params)
                except SphereHeatError:
                    return None, (float(value), exc)
            return None, (float(chunk[0]), exc)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]
    for _, failure in results:
        if failure is not None:
            value, exc = failure
            flat = np.flatnonzero(np.abs(w.ravel() - value) <= _W_QUANTUM)
            raise _KernelFailure(int(flat[0]) if flat.size else -1, exc) from exc
    values = np.concatenate([r[0] for r in results])
    return values[inverse].reshape(w.shape)


class _KernelFailure(Exception):
    def __init__(self, flat_index: int, cause: SphereHeatError):
        super().__init__(str(cause))
        self.flat_index = flat_index
        self.cause = cause


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.kind is KernelKind.LINEAR:
        return float(np.dot(x, y))
    if spec.kind is KernelKind.RBF:
        diff = x - y
        return float(math.exp(-spec.gamma * float(np.dot(diff, diff))))
    spec = spec.with_dimension(x.size)
    xh = sphere_map(x, spec.map)
    yh = sphere_map(y, spec.map)
    w = float(np.clip(np.dot(xh, yh), -1.0, 1.0))
    if np.array_equal(xh, yh):
        w = 1.0
    try:
        return float(_kernel_of_w(spec, np.asarray(w), threads=1))
    except _KernelFailure as fail:
        raise fail.cause


def cross_kernel(spec: KernelSpec, X, Y, threads: int = 1) -> np.ndarray:
    """Kernel values between every row of ``X`` and every row of ``Y``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if spec.kind is KernelKind.LINEAR:
        return X @ Y.T
    if spec.kind is KernelKind.RBF:
        sq = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
        return np.exp(-spec.gamma * np.maximum(sq, 0.0))
    spec = spec.with_dimension(X.shape[1])
    W = sphere_map_rows(X, spec.map) @ sphere_map_rows(Y, spec.map).T
    try:
        return _kernel_of_w(spec, W, threads=threads)
    except _KernelFailure as fail:
        i, j = np.unravel_index(max(fail.flat_index, 0), W.shape)
        raise type(fail.cause)(f"{fail.cause} (pair {i}, {j})") from fail.cause


def gram_matrix(spec: KernelSpec, data, sample_ids=None, threads: int = 1) -> GramMatrix:
    """Symmetric Gram matrix; the upper triangle is computed and mirrored."""
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvalidParams(f"need an (m, n) data matrix with m >= 2, got shape {X.shape}")
    m = X.shape[0]
    ids = [str(i) for i in range(m)] if sample_ids is None else [str(s) for s in sample_ids]
    spec = spec.with_dimension(X.shape[1])
    if spec.kind.spherical:
        try:
            Xh = sphere_map_rows(X, spec.map)
        except SphereHeatError as exc:
            raise type(exc)(f"{exc} (while building the Gram matrix)") from exc
        W = Xh @ Xh.T
        np.fill_diagonal(W, 1.0)
        iu = np.triu_indices(m, k=1)
        K = np.empty((m, m))
        try:
            K[iu] = _kernel_of_w(spec, W[iu], threads=threads)
        except _KernelFailure as fail:
            i, j = (int(iu[0][fail.flat_index]), int(iu[1][fail.flat_index])) if fail.flat_index >= 0 else (-1, -1)
            raise type(fail.cause)(f"{fail.cause} (pair {i}, {j})") from fail.cause
        K.T[iu] = K[iu]
        np.fill_diagonal(K, 1.0)
    else:
        K = cross_kernel(spec, X, X)
        K = np.triu(K) + np.triu(K, 1).T
        if spec.kind is KernelKind.RBF:
            np.fill_diagonal(K, 1.0)
        else:
            np.fill_diagonal(K, (X * X).sum(axis=1))
    return GramMatrix(entries=K, spec=spec, sample_ids=ids)


@dataclass(frozen=True)
class PsdReport:
    lambda_min: float
    lambda_max: float
    passed: bool

    def to_dict(self) -> dict:
        return {"lambda_min": self.lambda_min, "lambda_max": self.lambda_max, "pass": self.passed}


def psd_check(K: GramMatrix | np.ndarray, rtol: float = PSD_RTOL) -> PsdReport:
    """Dense eigenvalue check that lambda_min >= -rtol * lambda_max.

    A failure for the parametrix kernel is expected on spread-out data and is
    reported with a warning rather than raised.
    """
    entries = K.entries if isinstance(K, GramMatrix) else np.asarray(K, dtype=float)
    if entries.shape[0] > PSD_MAX_SIZE:
        raise MatrixTooLarge(f"psd_check is limited to m <= {PSD_MAX_SIZE}, got {entries.shape[0]}")
    eig = np.linalg.eigvalsh(entries)
    lam_min, lam_max = float(eig[0]), float(eig[-1])
    passed = lam_min >= -rtol * max(lam_max, 0.0)
    if not passed and isinstance(K, GramMatrix) and K.spec.kind is KernelKind.PARAMETRIX:
        warnings.warn(f"parametrix Gram matrix is not PSD: lambda_min = {lam_min:.3e}", stacklevel=2)
    return PsdReport(lambda_min=lam_min, lambda_max=lam_max, passed=passed)


def write_gram_csv(gram: GramMatrix, path_or_file) -> None:
    """Row-major CSV with a header of sample ids and 17 significant digits."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        fh.write(",".join(["id"] + gram.sample_ids) + "\n")
        for sid, row in zip(gram.sample_ids, gram.entries):
            fh.write(sid + "," + ",".join(f"{v:.17g}" for v in row) + "\n")
    finally:
        if own:
            fh.close()


def read_gram_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")[1:]
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    return header, np.array([[float(v) for v in r[1:]] for r in rows])
