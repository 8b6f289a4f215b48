"""Geodesic random walks on S^{n-1} checked against the exact heat kernel.

A walk of N steps of length delta approximates diffusion for time
t = N delta^2 / (2 (n - 1)): each step adds delta^2 / (n - 1) of variance to
each of the n - 1 tangent coordinates, and the generator of exp(t Laplacian)
needs 2t per coordinate.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from .errors import DimensionMismatch, DimensionTooSmall, InvalidParams, NotUnit, TooFewWalkers
from .exact import BULK_TRUNCATION, ExactKernelParams, g_exact
from .geometry import UNIT_TOL, log_surface_area

MAX_STEP = 0.1
MIN_WALKERS = 1000
BLOCK = 1024
_CDF_POINTS = 20001


@dataclass(frozen=True)
class WalkConfig:
    n: int
    step_size: float
    num_steps: int
    num_walkers: int
    seed: int = 0
    start: tuple | None = None

    def __post_init__(self):
        if self.n < 2:
            raise DimensionTooSmall(f"n must be >= 2, got {self.n}")
        if not 0 < self.step_size <= MAX_STEP:
            raise InvalidParams(f"step size must lie in (0, {MAX_STEP}], got {self.step_size}")
        if self.num_steps < 0 or self.num_walkers < 1:
            raise InvalidParams("need num_steps >= 0 and num_walkers >= 1")
        if self.start is not None:
            s = np.asarray(self.start, dtype=float)
            if s.shape != (self.n,):
                raise DimensionMismatch(f"start must have length {self.n}")
            if abs(np.linalg.norm(s) - 1.0) > UNIT_TOL:
                raise NotUnit("start must be a unit vector")

    @property
    def start_vector(self) -> np.ndarray:
        if self.start is None:
            e = np.zeros(self.n)
            e[0] = 1.0
            return e
        return np.asarray(self.start, dtype=float)

    @property
    def diffusion_time(self) -> float:
        return self.num_steps * self.step_size**2 / (2.0 * (self.n - 1))

    @classmethod
    def for_time(cls, n: int, t: float, step_size: float = 0.02, num_walkers: int = 20000, seed: int = 0, start=None):
        """Config whose step count matches diffusion time ``t`` as closely as possible."""
        steps = int(round(2.0 * (n - 1) * t / step_size**2))
        return cls(n=n, step_size=step_size, num_steps=steps, num_walkers=num_walkers, seed=seed, start=start)


@dataclass
class WalkResult:
    config: WalkConfig
    endpoints: np.ndarray
    paths: np.ndarray | None = None  # (walkers, recorded steps, n)
    path_steps: np.ndarray | None = None


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _run_block(config: WalkConfig, block: int, size: int, record_every: int | None):
    rng = _block_rng(config.seed, block)
    x = np.tile(config.start_vector, (size, 1))
    c, s = math.cos(config.step_size), math.sin(config.step_size)
    frames = [x.copy()] if record_every else None
    for step in range(1, config.num_steps + 1):
        v = rng.standard_normal(x.shape)
        v -= np.einsum("ij,ij->i", v, x)[:, None] * x
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        x = c * x + s * v
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        if record_every and step % record_every == 0:
            frames.append(x.copy())
    return x, (np.stack(frames, axis=1) if frames is not None else None)


def walk(config: WalkConfig, record_every: int | None = None, threads: int = 1) -> WalkResult:
    """Simulate all walkers; output does not depend on ``threads``.

    Walkers are processed in fixed blocks of 1024, each with its own RNG
    stream keyed by the block index.
    """
    sizes = [min(BLOCK, config.num_walkers - b) for b in range(0, config.num_walkers, BLOCK)]
    jobs = list(enumerate(sizes))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda j: _run_block(config, j[0], j[1], record_every), jobs))
    else:
        parts = [_run_block(config, b, size, record_every) for b, size in jobs]
    endpoints = np.vstack([p[0] for p in parts])
    paths = steps = None
    if record_every:
        paths = np.concatenate([p[1] for p in parts], axis=0)
        steps = np.arange(0, config.num_steps + 1, record_every)
    return WalkResult(config=config, endpoints=endpoints, paths=paths, path_steps=steps)


def uniform_sphere_sample(n: int, size: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((size, n))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def angles_from(endpoints, start) -> np.ndarray:
    return np.arccos(np.clip(np.asarray(endpoints) @ np.asarray(start, dtype=float), -1.0, 1.0))


def predicted_theta_density(theta, n: int, t: float | None):
    """Density of the polar angle: g(cos theta) A_{n-2} sin^{n-2} theta, or the uniform law if t is None."""
    theta = np.asarray(theta, dtype=float)
    log_slice = log_surface_area(n - 1)
    with np.errstate(divide="ignore"):
        log_sin = (n - 2) * np.log(np.sin(theta))
    if t is None:
        # uniform density 1 / A_{n-1}
        return np.exp(log_slice - log_surface_area(n) + log_sin)
    g = g_exact(np.cos(theta), ExactKernelParams(n=n, t=t, truncation=BULK_TRUNCATION))
    return np.clip(np.asarray(g.times_exp(log_slice + log_sin)), 0.0, None)


@dataclass
class ThetaCdf:
    grid: np.ndarray
    values: np.ndarray

    def __call__(self, theta):
        return np.interp(theta, self.grid, self.values)


def predicted_theta_cdf(n: int, t: float | None, points: int = _CDF_POINTS) -> ThetaCdf:
    grid = np.linspace(0.0, math.pi, points)
    dens = predicted_theta_density(grid, n, t)
    cdf = cumulative_trapezoid(dens, grid, initial=0.0)
    return ThetaCdf(grid=grid, values=cdf / cdf[-1])


@dataclass
class KernelComparison:
    ks_statistic: float
    bin_edges: np.ndarray
    histogram: np.ndarray  # empirical density per bin
    predicted_density: np.ndarray  # at bin centres
    walkers: int
    n: int
    t: float | None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        centers = 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])
        return {
            "ks_statistic": self.ks_statistic,
            "walkers": self.walkers,
            "n": self.n,
            "t": self.t,
            "bins": [
                {"theta": float(c), "empirical": float(h), "predicted": float(p)}
                for c, h, p in zip(centers, self.histogram, self.predicted_density)
            ],
            **self.extra,
        }


def compare_to_kernel(endpoints, n: int, t: float | None, bins: int = 50, start=None) -> KernelComparison:
    """KS distance between the walkers' polar angles and the heat-kernel prediction."""
    endpoints = np.asarray(endpoints, dtype=float)
    if endpoints.ndim != 2 or endpoints.shape[1] != n:
        raise DimensionMismatch(f"endpoints must have shape (W, {n})")
    if endpoints.shape[0] < MIN_WALKERS:
        raise TooFewWalkers(f"need at least {MIN_WALKERS} walkers, got {endpoints.shape[0]}")
    if bins < 1:
        raise InvalidParams("bins must be >= 1")
    if start is None:
        start = np.zeros(n)
        start[0] = 1.0
    theta = angles_from(endpoints, start)
    cdf = predicted_theta_cdf(n, t)
    ks = float(stats.kstest(theta, cdf).statistic)
    hist, edges = np.histogram(theta, bins=bins, range=(0.0, math.pi), density=True)
    centers = 0.5 * (edges[1:] + edges[:-1])
    return KernelComparison(
        ks_statistic=ks,
        bin_edges=edges,
        histogram=hist,
        predicted_density=predicted_theta_density(centers, n, t),
        walkers=endpoints.shape[0],
        n=n,
        t=t,
    )


def write_paths_csv(result: WalkResult, path_or_file) -> None:
    """Long-format CSV: walker, step, x0 .. x{n-1}."""
    if result.paths is None:
        raise InvalidParams("walk was run without path recording")
    own = isinstance(path_or_file, str) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        n = result.config.n
        fh.write(",".join(["walker", "step"] + [f"x{j}" for j in range(n)]) + "\n")
        for w, frames in enumerate(result.paths):
            for step, x in zip(result.path_steps, frames):
                fh.write(f"{w},{step}," + ",".join(f"{v:.17g}" for v in x) + "\n")
    finally:
        if own:
            fh.close()
