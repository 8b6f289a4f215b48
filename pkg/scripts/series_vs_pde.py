"""Compare the Gegenbauer series with the finite-volume PDE solution over 64 angles."""

from __future__ import annotations

import argparse
import math
import time
from dataclasses import dataclass, field

import numpy as np

from sphereheat.exact import ExactKernelParams, g_exact, pde_oracle_refined


@dataclass
class Config:
    dims: list[int] = field(default_factory=lambda: [3, 10, 50])
    times: list[float] = field(default_factory=lambda: [0.05, 0.5, 2.0])
    angles: int = 64
    grid_points: int = 2000


def run(cfg: Config):
    theta = np.linspace(0, math.pi, cfg.angles)
    for n in cfg.dims:
        for t in cfg.times:
            start = time.perf_counter()
            series = g_exact(np.cos(theta), ExactKernelParams(n, t)).value
            oracle = pde_oracle_refined(n, t, theta, cfg.grid_points)
            rel = np.abs(oracle / series - 1)
            print(
                f"n={n:3d} t={t:<5g} max rel diff {rel.max():.2e}  "
                f"G(pi)/G(0) {series[-1] / series[0]:.1e}  {time.perf_counter() - start:.1f}s"
            )


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--grid-points", type=int, default=Config.grid_points)
    run(Config(grid_points=p.parse_args().grid_points))
