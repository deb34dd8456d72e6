"""Overhead and reconstruction residual of the system-only comb correction."""
from dataclasses import dataclass

from _common import parse_config, write
from vqrd.cli import figure_rows, render


@dataclass
class Config:
    output: str = "results/comb_table.csv"


if __name__ == "__main__":
    cfg = parse_config(Config, __doc__)
    write(render(figure_rows("comb", 0.0, 0), "csv"), cfg.output)
