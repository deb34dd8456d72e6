"""Memory-correction overhead for depolarizing, dephasing and replacement noise."""
from dataclasses import dataclass

from _common import parse_config, write
from vqrd.cli import figure_rows, render


@dataclass
class Config:
    eps: float = 0.01
    n: int = 101
    output: str = "results/memory_curves.csv"


if __name__ == "__main__":
    cfg = parse_config(Config, __doc__)
    write(render(figure_rows("fig2", cfg.eps, cfg.n), "csv"), cfg.output)
