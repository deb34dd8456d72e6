"""Virtual resource distillation: overheads, bounds and sampling protocols."""

__version__ = "0.1.0"
