"""Generalisation bound F(m~) for a few capacities, with its stationary point."""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field

import numpy as np

from sphereheat.errors import InvalidArgument
from sphereheat.svm import critical_effective_size, generalization_bound


@dataclass
class Config:
    mu_values: list[float] = field(default_factory=lambda: [5.0, 20.0, 100.0, 401.0])
    eta: float = 0.05
    m_tilde: list[float] = field(default_factory=lambda: list(np.geomspace(0.5, 1e4, 12)))


def run(cfg: Config):
    print("m~        " + "".join(f"mu={mu:<8g}" for mu in cfg.mu_values))
    for m in cfg.m_tilde:
        cells = []
        for mu in cfg.mu_values:
            try:
                cells.append(f"{generalization_bound(m, mu, cfg.eta):<11.4f}")
            except InvalidArgument:
                cells.append(f"{'-':<11s}")
        print(f"{m:<10.3g}" + "".join(cells))
    for mu in cfg.mu_values:
        print(f"mu={mu:g}: stationary point m~ = {critical_effective_size(mu, cfg.eta):.4f}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--eta", type=float, default=Config.eta)
    run(Config(eta=p.parse_args().eta))
