"""Amplitude damping: rate lower bound 1/C^2 against the quantum capacity."""
from dataclasses import dataclass

from _common import parse_config, write
from vqrd import channels as ch
from vqrd.cli import render


@dataclass
class Config:
    n: int = 101
    method: str = "closed"
    output: str = "results/damping_rate.csv"


if __name__ == "__main__":
    cfg = parse_config(Config, __doc__)
    rows = [{"gamma": g, "v_lower": v, "capacity": q} for g, v, q in ch.damping_rate_data(cfg.n, cfg.method)]
    write(render(rows, "csv"), cfg.output)
