"""Repeated signed Monte Carlo runs: empirical error against the Hoeffding guarantee."""
import json
from dataclasses import dataclass

import numpy as np

from _common import parse_config, write
from vqrd import sampler as sp
from vqrd.cli import sample_setup


@dataclass
class Config:
    preset: str = "coherence:beta=0.25"
    eps: float = 0.0
    beta: float = 0.05
    delta: float = 0.05
    reps: int = 200
    seed: int = 0
    output: str = "results/sampler.json"


if __name__ == "__main__":
    cfg = parse_config(Config, __doc__)
    d, rho, M, ideal = sample_setup(cfg.preset, cfg.eps)
    exact = sp.exact_expectation(d, rho, M)
    n = sp.sample_complexity(d.gamma, cfg.beta, cfg.delta, d.m)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(cfg.reps)
    est = np.array([sp.estimate_expectation(d, rho, M, n, seed=int(s)).estimate for s in seeds])
    out = {
        "preset": cfg.preset, "gamma": d.gamma, "n_per_run": n, "reps": cfg.reps, "exact": exact, "ideal": ideal,
        "mean_estimate": float(est.mean()), "std_estimate": float(est.std(ddof=1)),
        "failure_rate": float(np.mean(np.abs(est - exact) > cfg.beta)), "delta": cfg.delta,
    }
    write(json.dumps(out, indent=2) + "\n", cfg.output)
