"""Data ingestion, class balancing, stratified CV and hyperparameter search."""

from __future__ import annotations

import csv
import gzip
import io
import json
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import KMeans

from .errors import (
    ClassSmallerThanK,
    ClassTooSmall,
    InvalidParams,
    NegativeValueForCountData,
    ParseError,
)
from .exact import BULK_TRUNCATION, TruncationPolicy, sweet_spot_time
from .geometry import SphereMap
from .kernels import KernelKind, KernelSpec, gram_matrix
from .svm import predict_multiclass, train_multiclass

SCHEMA_VERSION = 1
DEFAULT_T_STAR_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0)


@dataclass
class LabeledDataset:
    matrix: np.ndarray
    labels: np.ndarray
    feature_names: list[str]
    sample_ids: list[str]

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.labels = np.asarray(self.labels)
        m = self.matrix.shape[0]
        if self.matrix.ndim != 2 or m < 2:
            raise InvalidParams(f"dataset needs an (m, n) matrix with m >= 2, got {self.matrix.shape}")
        if self.labels.shape != (m,) or len(self.sample_ids) != m:
            raise InvalidParams("labels and sample ids must have one entry per row")
        if len(self.feature_names) != self.matrix.shape[1]:
            raise InvalidParams("one feature name per column is required")
        if not np.all(np.isfinite(self.matrix)):
            raise InvalidParams("dataset contains missing or non-finite values")

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def classes(self) -> list:
        return sorted(set(self.labels.tolist()))

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=int)
        return LabeledDataset(
            self.matrix[rows], self.labels[rows], list(self.feature_names), [self.sample_ids[i] for i in rows]
        )


def _open_text(path):
    with open(path, "rb") as probe:
        magic = probe.read(2)
    if magic == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.open(path, "rb"), newline="")
    return open(path, newline="")


def load_csv(path, label_column: str = "label", map_hint=None, id_column: str | None = None) -> LabeledDataset:
    """Read a header-row CSV (optionally gzip-compressed) of numeric features plus a label column.

    Locations in ``ParseError`` are 1-based file lines and columns.
    """
    hint = SphereMap.parse(map_hint)
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ParseError(f"label column {label_column!r} not in header", line=1)
        if id_column is not None and id_column not in header:
            raise ParseError(f"id column {id_column!r} not in header", line=1)
        label_at = header.index(label_column)
        id_at = header.index(id_column) if id_column is not None else None
        feature_at = [j for j in range(len(header)) if j not in (label_at, id_at)]
        rows, labels, ids = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(row)}", line=line)
            values = []
            for j in feature_at:
                cell = row[j].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(f"non-numeric cell {cell!r}", line=line, column=j + 1) from None
                if not math.isfinite(value):
                    raise ParseError(f"missing or non-finite cell {cell!r}", line=line, column=j + 1)
                if hint is SphereMap.SQRT_L1 and value < 0:
                    raise NegativeValueForCountData(
                        f"negative value {value} at line {line}, column {j + 1} under the sqrt-l1 map"
                    )
                values.append(value)
            rows.append(values)
            labels.append(row[label_at].strip())
            ids.append(row[id_at].strip() if id_at is not None else f"{len(ids) + 1:06d}")
    if len(rows) < 2:
        raise ParseError(f"need at least 2 data rows, found {len(rows)}")
    return LabeledDataset(np.asarray(rows, dtype=float), np.asarray(labels), [header[j] for j in feature_at], ids)


def save_csv(data: LabeledDataset, path, label_column: str = "label", id_column: str = "id") -> None:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wt", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([id_column] + list(data.feature_names) + [label_column])
        for sid, row, label in zip(data.sample_ids, data.matrix, data.labels):
            writer.writerow([sid] + [repr(float(v)) for v in row] + [label])


# --- balancing -----------------------------------------------------------


def select_representatives(data: LabeledDataset, class_id, m_r: int, runs: int = 50, seed: int = 0) -> list[str]:
    """The ``m_r`` samples of one class chosen most often as nearest-to-centroid over repeated KMeans.

    Each run clusters the raw feature rows of the class into ``m_r`` groups and
    nominates the sample closest to each centroid. Frequency ties are broken by
    sample id in lexicographic order.
    """
    rows = np.flatnonzero(data.labels == class_id)
    if m_r < 1:
        raise InvalidParams(f"m_r must be >= 1, got {m_r}")
    if rows.size < m_r:
        raise ClassTooSmall(f"class {class_id!r} has {rows.size} samples, fewer than m_r = {m_r}")
    ids = [data.sample_ids[i] for i in rows]
    if rows.size == m_r:
        return sorted(ids)
    X = data.matrix[rows]
    counts: Counter = Counter()
    for child in np.random.SeedSequence(seed).spawn(runs):
        state = int(child.generate_state(1)[0])
        km = KMeans(n_clusters=m_r, init="k-means++", n_init=1, max_iter=300, random_state=state).fit(X)
        d2 = ((X[:, None, :] - km.cluster_centers_[None, :, :]) ** 2).sum(axis=2)
        for i in set(np.argmin(d2, axis=0).tolist()):
            counts[ids[i]] += 1
    ranked = sorted(ids, key=lambda s: (-counts[s], s))
    return ranked[:m_r]


def balance_classes(data: LabeledDataset, m_r: int, runs: int = 50, seed: int = 0) -> LabeledDataset:
    """Keep ``m_r`` representatives per class (see ``select_representatives``)."""
    keep = []
    position = {sid: i for i, sid in enumerate(data.sample_ids)}
    for c, child in zip(data.classes, np.random.SeedSequence(seed).spawn(len(data.classes))):
        chosen = select_representatives(data, c, m_r, runs=runs, seed=int(child.generate_state(1)[0]))
        keep.extend(position[s] for s in chosen)
    return data.subset(sorted(keep))


# --- cross-validation ----------------------------------------------------


def stratified_kfold(labels, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Per-class shuffled round-robin assignment of samples to ``k`` test folds."""
    labels = np.asarray(labels)
    if k < 2:
        raise InvalidParams(f"k must be >= 2, got {k}")
    classes = sorted(set(labels.tolist()))
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for c, child in zip(classes, np.random.SeedSequence(seed).spawn(len(classes))):
        members = np.flatnonzero(labels == c)
        if members.size < k:
            raise ClassSmallerThanK(f"class {c!r} has {members.size} samples, fewer than k = {k}")
        members = np.random.default_rng(child).permutation(members)
        for i, idx in enumerate(members):
            folds[(offset + i) % k].append(int(idx))
        # rotate the start so leftover samples spread over folds
        offset = (offset + members.size) % k
    return [np.sort(np.asarray(f, dtype=int)) for f in folds]


def fold_accuracies(K: np.ndarray, labels, folds, C: float, tol: float = 1e-3, seed: int = 0) -> list[float]:
    """Train one-vs-one SVMs on each fold's complement and score the held-out fold."""
    labels = np.asarray(labels)
    m = labels.size
    out = []
    for test in folds:
        train_idx = np.setdiff1d(np.arange(m), test)
        model = train_multiclass(K[np.ix_(train_idx, train_idx)], labels[train_idx], C=C, tol=tol, seed=seed)
        pred = predict_multiclass(model, K[np.ix_(test, train_idx)])
        out.append(float(np.mean(pred == labels[test])))
    return out


@dataclass
class GridPoint:
    spec: KernelSpec
    C: float
    t_star: float | None = None
    fold_accuracies: list[float] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies)) if self.fold_accuracies else float("nan")

    def to_dict(self) -> dict:
        out = {"spec": self.spec.to_dict(), "C": self.C}
        if self.t_star is not None:
            out["t_star"] = self.t_star
        out["fold_accuracies"] = list(self.fold_accuracies)
        out["mean"] = self.mean
        return out


@dataclass
class CvReport:
    grid: list[GridPoint]
    seed: int
    folds: int
    wall_time: float | None = None

    @property
    def best_index(self) -> int:
        means = [p.mean for p in self.grid]
        return int(np.argmax(means))

    @property
    def best(self) -> GridPoint:
        return self.grid[self.best_index]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "folds": self.folds,
            "grid": [p.to_dict() for p in self.grid],
            "best": self.best_index,
            "best_mean": self.best.mean,
            "wall_time": self.wall_time,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def to_table(self) -> str:
        return format_table(self.grid, best=self.best_index)


def _describe(spec: KernelSpec) -> str:
    parts = [spec.kind.value]
    if spec.gamma is not None:
        parts.append(f"gamma={spec.gamma:g}")
    if spec.t is not None:
        parts.append(f"t={spec.t:.4g}")
    return " ".join(parts)


def format_table(points: list[GridPoint], best: int | None = None) -> str:
    """Aligned text table; accuracies shown as percentages to 2 decimals."""
    if not points:
        return ""
    k = len(points[0].fold_accuracies)
    header = ["kernel", "C"] + [f"fold{i + 1}" for i in range(k)] + ["mean"]
    body = []
    for i, p in enumerate(points):
        row = [_describe(p.spec) + (" *" if i == best else ""), f"{p.C:g}"]
        row += [f"{100 * a:.2f}" for a in p.fold_accuracies] + [f"{100 * p.mean:.2f}"]
        body.append(row)
    widths = [max(len(r[j]) for r in [header] + body) for j in range(len(header))]
    lines = ["  ".join(c.ljust(w) if j == 0 else c.rjust(w) for j, (c, w) in enumerate(zip(r, widths))) for r in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def kernel_grid(
    kind,
    n: int,
    sphere_map=SphereMap.SQRT_L1,
    t_star_grid=DEFAULT_T_STAR_GRID,
    gamma_grid=(0.01, 0.1, 1.0),
    truncation: TruncationPolicy | None = None,
) -> list[tuple[KernelSpec, float | None]]:
    """Kernel specs for one family; heat kernels use t = t* log(n)/n."""
    kind = KernelKind(kind)
    if kind is KernelKind.LINEAR:
        return [(KernelSpec(kind), None)]
    if kind is KernelKind.RBF:
        return [(KernelSpec(kind, gamma=float(g)), None) for g in gamma_grid]
    if kind is KernelKind.COSINE:
        return [(KernelSpec(kind, map=sphere_map), None)]
    extra = {"n": n, "truncation": truncation or BULK_TRUNCATION} if kind is KernelKind.EXACT else {}
    return [(KernelSpec(kind, map=sphere_map, t=sweet_spot_time(n, ts), **extra), float(ts)) for ts in t_star_grid]


def grid_search_cv(
    data: LabeledDataset,
    kernel_family,
    t_star_grid=DEFAULT_T_STAR_GRID,
    C_grid=DEFAULT_C_GRID,
    k: int = 5,
    seed: int = 0,
    sphere_map=SphereMap.SQRT_L1,
    gamma_grid=(0.01, 0.1, 1.0),
    threads: int = 1,
    tol: float = 1e-3,
    timed: bool = False,
) -> CvReport:
    """Stratified k-fold accuracy at every (kernel, C) grid point.

    Each kernel's Gram matrix is built once on the full dataset and
    sub-indexed per fold. ``wall_time`` is only filled in when ``timed`` is set
    so that reports stay byte-identical across runs by default.
    """
    start = time.perf_counter()
    folds = stratified_kfold(data.labels, k=k, seed=seed)
    specs = kernel_grid(kernel_family, data.n, sphere_map, t_star_grid, gamma_grid)

    def run(entry):
        spec, t_star = entry
        K = gram_matrix(spec, data.matrix, data.sample_ids).entries
        return [
            GridPoint(spec.with_dimension(data.n), float(C), t_star, fold_accuracies(K, data.labels, folds, float(C), tol=tol, seed=seed))
            for C in C_grid
        ]

    if threads > 1 and len(specs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(run, specs))
    else:
        blocks = [run(s) for s in specs]
    grid = [p for block in blocks for p in block]
    return CvReport(grid=grid, seed=seed, folds=k, wall_time=time.perf_counter() - start if timed else None)


@dataclass
class RepeatedCvResult:
    kernel: str
    runs: list[CvReport]
    seed: int

    @property
    def best_means(self) -> list[float]:
        return [r.best.mean for r in self.runs]

    @property
    def mean_of_best(self) -> float:
        return float(np.mean(self.best_means))

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "seed": self.seed,
            "best_means": self.best_means,
            "mean_of_best": self.mean_of_best,
            "runs": [r.to_dict() for r in self.runs],
        }


def repeated_cv(
    data: LabeledDataset,
    kernel_family,
    runs: int = 5,
    seed: int = 0,
    m_r: int | None = None,
    balance_runs: int = 50,
    **grid_kwargs,
) -> RepeatedCvResult:
    """Average the optimal CV mean over ``runs`` seeded repetitions.

    Each repetition draws its own fold split and, when ``m_r`` is given, its
    own representative selection; all seeds derive from ``seed``.
    """
    reports = []
    for child in np.random.SeedSequence(seed).spawn(runs):
        balance_seed, cv_seed = (int(s) for s in child.generate_state(2))
        subset = balance_classes(data, m_r, runs=balance_runs, seed=balance_seed) if m_r else data
        reports.append(grid_search_cv(subset, kernel_family, seed=cv_seed, **grid_kwargs))
    return RepeatedCvResult(kernel=KernelKind(kernel_family).value, runs=reports, seed=seed)


# --- synthetic data ------------------------------------------------------


def radial_noise_fixture(
    n_classes: int = 4,
    per_class: int = 40,
    n_features: int = 40,
    seed: int = 0,
    radius_range: tuple[float, float] = (1.0, 100.0),
    concentration: float = 4.0,
    spread: float = 1.0,
) -> LabeledDataset:
    """Nonnegative class clusters on the sphere whose norms carry no label information.

    Each class gets a Dirichlet prototype direction; samples are the prototype
    plus nonnegative noise, normalised, then rescaled by a radius drawn
    uniformly from ``radius_range`` independently of the label.
    """
    rng = np.random.default_rng(seed)
    protos = rng.dirichlet(np.full(n_features, 1.0 / concentration), size=n_classes)
    rows, labels = [], []
    for c in range(n_classes):
        noise = rng.gamma(shape=0.5, scale=spread / n_features, size=(per_class, n_features))
        direction = protos[c] + noise
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radii = rng.uniform(*radius_range, size=(per_class, 1))
        rows.append(direction * radii)
        labels += [f"class{c}"] * per_class
    X = np.vstack(rows)
    ids = [f"{i:06d}" for i in range(X.shape[0])]
    return LabeledDataset(X, np.asarray(labels), [f"f{j}" for j in range(n_features)], ids)
